#pragma once

// Umbrella header.

#include "alert_sift/corpus_ingest.hpp"
#include "alert_sift/evaluation.hpp"
#include "alert_sift/features.hpp"
#include "alert_sift/forest.hpp"
#include "alert_sift/sampler.hpp"
#include "alert_sift/synth_corpus.hpp"
#include "alert_sift/tree_shap.hpp"
#include "alert_sift/weak_labeler.hpp"
