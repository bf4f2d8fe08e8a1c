#pragma once

#include "gpcd/adam.hpp"
#include "gpcd/autodiff.hpp"
#include "gpcd/cause_discovery.hpp"
#include "gpcd/clustering.hpp"
#include "gpcd/config.hpp"
#include "gpcd/dataset_io.hpp"
#include "gpcd/error.hpp"
#include "gpcd/gradcheck.hpp"
#include "gpcd/graph.hpp"
#include "gpcd/losses.hpp"
#include "gpcd/model.hpp"
#include "gpcd/model_io.hpp"
#include "gpcd/pll_noise.hpp"
#include "gpcd/rng.hpp"
#include "gpcd/synthetic.hpp"
#include "gpcd/tensor.hpp"
#include "gpcd/theorem.hpp"
#include "gpcd/trainer.hpp"
