#pragma once

#include "cdcr/agreement.hpp"
#include "cdcr/annotation_engine.hpp"
#include "cdcr/baselines.hpp"
#include "cdcr/config.hpp"
#include "cdcr/corpus.hpp"
#include "cdcr/corpus_store.hpp"
#include "cdcr/evaluation.hpp"
#include "cdcr/event_log.hpp"
#include "cdcr/ingestion.hpp"
#include "cdcr/pair_generation.hpp"
#include "cdcr/workbench.hpp"
