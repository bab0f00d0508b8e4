#pragma once

#include "csv.hpp"
#include "data_model.hpp"
#include "dic.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "linear_model.hpp"
#include "model_io.hpp"
#include "nn.hpp"
#include "optimizer.hpp"
#include "rng.hpp"
#include "synth.hpp"
#include "uncertainty.hpp"
