#pragma once

#include "evidential/checkpoint.hpp"
#include "evidential/data.hpp"
#include "evidential/dst.hpp"
#include "evidential/enn.hpp"
#include "evidential/error.hpp"
#include "evidential/experiments.hpp"
#include "evidential/feature_net.hpp"
#include "evidential/init.hpp"
#include "evidential/kmeans.hpp"
#include "evidential/linalg.hpp"
#include "evidential/losses.hpp"
#include "evidential/metrics.hpp"
#include "evidential/model.hpp"
#include "evidential/optim.hpp"
#include "evidential/params.hpp"
#include "evidential/rbf.hpp"
#include "evidential/train.hpp"
