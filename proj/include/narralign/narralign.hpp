#pragma once

#include "narralign/align.hpp"
#include "narralign/alignment_io.hpp"
#include "narralign/analysis.hpp"
#include "narralign/corpus.hpp"
#include "narralign/corpus_io.hpp"
#include "narralign/embedding.hpp"
#include "narralign/error.hpp"
#include "narralign/similarity.hpp"
#include "narralign/stats.hpp"
#include "narralign/text.hpp"
