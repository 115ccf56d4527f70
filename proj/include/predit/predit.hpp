#pragma once

#include "predit/error.hpp"
#include "predit/vector_ops.hpp"
#include "predit/multistep.hpp"
#include "predit/dynamics.hpp"
#include "predit/oracle.hpp"
#include "predit/fields.hpp"
#include "predit/sampler.hpp"
#include "predit/policy.hpp"
#include "predit/error_lab.hpp"
#include "predit/report.hpp"
#include "predit/config.hpp"
#include "predit/cli.hpp"
