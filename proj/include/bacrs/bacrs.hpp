#pragma once

#include "bacrs/agreement.hpp"
#include "bacrs/behavior.hpp"
#include "bacrs/behavior_metrics.hpp"
#include "bacrs/config.hpp"
#include "bacrs/corpus.hpp"
#include "bacrs/error.hpp"
#include "bacrs/features.hpp"
#include "bacrs/hash.hpp"
#include "bacrs/linear_model.hpp"
#include "bacrs/pair_classifier.hpp"
#include "bacrs/random.hpp"
#include "bacrs/synth_lab.hpp"
#include "bacrs/text_metrics.hpp"
#include "bacrs/version.hpp"
