#pragma once

#include "moree/common.hpp"
#include "moree/corpus.hpp"
#include "moree/dataset.hpp"
#include "moree/decoding.hpp"
#include "moree/example.hpp"
#include "moree/generator.hpp"
#include "moree/metrics.hpp"
#include "moree/moe.hpp"
#include "moree/pipeline.hpp"
#include "moree/retriever.hpp"
#include "moree/text.hpp"
#include "moree/vectors.hpp"
