#!/usr/bin/env python3
"""Regenerates the architecture configs under configs/.

The CIFAR-scale ResNeXt-29 (32x4d) and MobileNetV2 descriptions are long and
repetitive; this script is the single source of truth for them. Run from the
repository root:

    python3 tools/gen_arch_configs.py
"""

import json
import pathlib

K = 4  # macroblock size used by the CIFAR-scale configs


def conv(name, out, kernel, stride=1, pad=0, groups=1, branch=False):
    layer = {"name": name, "type": "conv2d", "out": out, "kernel": kernel,
             "stride": stride, "pad": pad}
    if groups != 1:
        layer["groups"] = groups
    if branch:
        layer["branch"] = True
    return layer


def wrapped_pw(name, out):
    return {"name": name, "type": "freq_pointwise", "out": out, "k": K}


def spatial_pw(name, out):
    return {"name": name, "type": "pointwise", "out": out}


def bn_relu():
    return [{"type": "batchnorm"}, {"type": "relu"}]


def resnext29_cifar():
    """ResNeXt-29, cardinality 32, bottleneck width 4, 32x32 input.

    Pointwise convs on the main path are wrapped; projection shortcuts are
    plain convolutions (they sit on the skip branch, merged by the add).
    """
    layers = [conv("conv1", 64, 3, 1, 1)] + bn_relu()
    stages = [
        ("s1", 64, 128, 256, 1),
        ("s2", 256, 256, 512, 2),
        ("s3", 512, 512, 1024, 2),
    ]
    for sname, c_in, width, c_out, stride in stages:
        for b in range(3):
            prefix = f"{sname}.b{b}"
            blk_in = c_in if b == 0 else c_out
            blk_stride = stride if b == 0 else 1
            if b == 0:
                layers.append(conv(f"{prefix}.shortcut", c_out, 1, blk_stride,
                                   0, branch=True))
            layers.append(wrapped_pw(f"{prefix}.reduce", width))
            layers += bn_relu()
            layers.append(conv(f"{prefix}.grouped3x3", width, 3, blk_stride, 1,
                               groups=32))
            layers += bn_relu()
            layers.append(wrapped_pw(f"{prefix}.expand", c_out))
            layers += bn_relu()
            _ = blk_in
    layers.append({"type": "global_avg_pool"})
    layers.append({"name": "fc", "type": "dense", "out": 10})
    return {
        "name": "resnext29_cifar",
        "input": {"c": 3, "h": 32, "w": 32},
        "classes": 10,
        "layers": layers,
    }


def mobilenetv2_cifar():
    """MobileNetV2 (width 1.0) adapted to 32x32 inputs.

    Stem stride 1 and first bottleneck stage stride 1, the usual CIFAR
    adaptation; inverted-residual blocks carry identity skips only. Block
    pointwise convs are wrapped; the classifier head conv feeds the global
    pool and stays spatial.
    """
    layers = [conv("stem", 32, 3, 1, 1)] + bn_relu()
    cfg = [  # expansion t, out channels, repeats, first stride
        (1, 16, 1, 1),
        (6, 24, 2, 1),
        (6, 32, 3, 2),
        (6, 64, 4, 2),
        (6, 96, 3, 1),
        (6, 160, 3, 2),
        (6, 320, 1, 1),
    ]
    c_in = 32
    blk = 0
    for t, c_out, n, s in cfg:
        for i in range(n):
            stride = s if i == 0 else 1
            prefix = f"blk{blk}"
            hidden = c_in * t
            if t != 1:
                layers.append(wrapped_pw(f"{prefix}.expand", hidden))
                layers += bn_relu()
            layers.append(conv(f"{prefix}.dw", hidden, 3, stride, 1,
                               groups=hidden))
            layers += bn_relu()
            layers.append(wrapped_pw(f"{prefix}.project", c_out))
            layers.append({"type": "batchnorm"})
            c_in = c_out
            blk += 1
    layers.append(spatial_pw("head", 1280))
    layers += bn_relu()
    layers.append({"type": "global_avg_pool"})
    layers.append({"name": "fc", "type": "dense", "out": 10})
    return {
        "name": "mobilenetv2_cifar",
        "input": {"c": 3, "h": 32, "w": 32},
        "classes": 10,
        "layers": layers,
    }


def toynet24():
    """Small separable net for the self-contained training pipeline:
    four expand / depthwise / project blocks on 24x24 inputs, k = 3."""
    def block(prefix, c_hidden, c_out, stride):
        layers = [
            {"name": f"{prefix}.expand", "type": "freq_pointwise",
             "out": c_hidden, "k": 3},
            {"type": "batchnorm"},
            {"type": "relu6"},
            conv(f"{prefix}.dw", c_hidden, 3, stride, 1, groups=c_hidden),
            {"type": "batchnorm"},
            {"type": "relu6"},
            {"name": f"{prefix}.project", "type": "freq_pointwise",
             "out": c_out, "k": 3},
            {"type": "batchnorm"},
        ]
        return layers

    layers = [conv("stem", 16, 3, 1, 1), {"type": "batchnorm"},
              {"type": "relu6"}]
    layers += block("b0", 32, 24, 1)   # 24x24
    layers += block("b1", 48, 32, 2)   # -> 12x12
    layers += block("b2", 64, 32, 1)   # 12x12
    layers += block("b3", 64, 48, 2)   # -> 6x6
    layers.append({"type": "relu6"})
    layers.append({"type": "global_avg_pool"})
    layers.append({"name": "head", "type": "dense", "out": 3})
    return {
        "name": "toynet24",
        "input": {"c": 3, "h": 24, "w": 24},
        "classes": 3,
        "layers": layers,
    }


def main():
    out_dir = pathlib.Path(__file__).resolve().parent.parent / "configs"
    out_dir.mkdir(exist_ok=True)
    for fname, cfg in [
        ("resnext29_cifar.json", resnext29_cifar()),
        ("mobilenetv2_cifar.json", mobilenetv2_cifar()),
        ("toynet24.json", toynet24()),
    ]:
        path = out_dir / fname
        path.write_text(json.dumps(cfg, indent=2) + "\n")
        print(f"wrote {path} ({len(cfg['layers'])} layers)")


if __name__ == "__main__":
    main()
