#pragma once

#include "structrank/analyzer.hpp"
#include "structrank/bm25.hpp"
#include "structrank/classifier.hpp"
#include "structrank/corpus.hpp"
#include "structrank/eval.hpp"
#include "structrank/experiment.hpp"
#include "structrank/matcher.hpp"
#include "structrank/relations.hpp"
#include "structrank/reranker.hpp"
#include "structrank/util.hpp"
