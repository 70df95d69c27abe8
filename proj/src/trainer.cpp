#include "freqprune/trainer.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace freqprune {

using nlohmann::json;

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open train config: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw validation_error(std::string("malformed train config: ") + e.what());
    }
    TrainConfig cfg;
    cfg.schedule = schedule_from_string(j.value("schedule", "baseline"));
    cfg.lambda = j.value("lambda", 0.0);
    cfg.lr_weights = j.value("lr_weights", 0.05);
    cfg.lr_fcmask = j.value("lr_fcmask", 0.01);
    cfg.momentum = j.value("momentum", 0.9);
    cfg.epochs = j.value("epochs", 10);
    cfg.epochs_pretrain = j.value("epochs_pretrain", 4);
    cfg.epochs_mask = j.value("epochs_mask", 4);
    cfg.epochs_refine = j.value("epochs_refine", 4);
    cfg.batch_size = j.value("batch_size", 32);
    cfg.seed = j.value("seed", std::uint64_t(1));
    cfg.reinit_refine = j.value("reinit_refine", false);
    if (cfg.lambda < 0 || cfg.lr_weights < 0 || cfg.lr_fcmask < 0)
        throw validation_error("rates and lambda must be >= 0");
    if (cfg.epochs < 0 || cfg.epochs_pretrain < 0 || cfg.epochs_mask < 0 ||
        cfg.epochs_refine < 0)
        throw validation_error("epoch counts must be >= 0");
    return cfg;
}

std::string TrainConfig::to_json() const {
    json j;
    j["schedule"] = to_string(schedule);
    j["lambda"] = lambda;
    j["lr_weights"] = lr_weights;
    j["lr_fcmask"] = lr_fcmask;
    j["momentum"] = momentum;
    j["epochs"] = epochs;
    j["epochs_pretrain"] = epochs_pretrain;
    j["epochs_mask"] = epochs_mask;
    j["epochs_refine"] = epochs_refine;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    j["reinit_refine"] = reinit_refine;
    return j.dump(2);
}

}  // namespace freqprune
