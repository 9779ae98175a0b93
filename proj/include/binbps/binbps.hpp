#pragma once

#include "binbps/augmentation.hpp"
#include "binbps/bps.hpp"
#include "binbps/errors.hpp"
#include "binbps/estimators.hpp"
#include "binbps/harness.hpp"
#include "binbps/hmc.hpp"
#include "binbps/io.hpp"
#include "binbps/model.hpp"
#include "binbps/oracle.hpp"
#include "binbps/selftest.hpp"
