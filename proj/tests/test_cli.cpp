// cli tests are added with the cli module
#include "doctest.h"
