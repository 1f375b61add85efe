#pragma once

#include <vector>

#include "moree/text.hpp"

namespace moree {

/// One benchmark example: a concept pair and its 3-5 reference sentences.
struct DatasetExample {
  ConceptPair pair;
  std::vector<TokenSeq> targets;

  bool operator==(const DatasetExample&) const = default;
};

}  // namespace moree
