#pragma once

#include "nomen/adam.hpp"
#include "nomen/csv.hpp"
#include "nomen/dataset.hpp"
#include "nomen/errors.hpp"
#include "nomen/gradcheck.hpp"
#include "nomen/layers.hpp"
#include "nomen/metrics.hpp"
#include "nomen/mlp.hpp"
#include "nomen/model.hpp"
#include "nomen/model_io.hpp"
#include "nomen/name_codec.hpp"
#include "nomen/prevalence.hpp"
#include "nomen/prob.hpp"
#include "nomen/pseudo_label.hpp"
#include "nomen/rng.hpp"
#include "nomen/taxonomy.hpp"
#include "nomen/tensor.hpp"
#include "nomen/train.hpp"
