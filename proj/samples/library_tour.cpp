// Small tour of the library: train a two-expert generator on a handful of
// sentences, decode one sentence per expert and score the set.

#include <iostream>

#include "moree/moree.hpp"

using namespace moree;

int main() {
  const auto pair = ConceptPair::make("dog", "sheep");
  const std::vector<TokenSeq> targets{tokenize("the dog herds the sheep into the barn ."),
                                      tokenize("a sleepy dog lies beside the sheep .")};

  // Expert identifiers are short random prefixes drawn from the context vocabulary.
  const std::vector<TokenSeq> action{tokenize("the dog herds sheep across the field ."),
                                     tokenize("a dog chases the sheep into the barn .")};
  const std::vector<TokenSeq> calm{tokenize("a sleepy dog rests near the sheep ."),
                                   tokenize("the old dog lies beside a sheep .")};
  std::vector<Token> words;
  for (const auto* set : {&action, &calm})
    for (const auto& s : *set) words.insert(words.end(), s.begin(), s.end());
  HardEMConfig hc;
  hc.n_experts = 2;
  hc.prefix_len = 3;
  const auto experts = init_experts(hc, words);

  std::vector<const TokenSeq*> sources;
  for (const auto* set : {&action, &calm})
    for (const auto& s : *set) sources.push_back(&s);
  auto model = generation::GeneratorModel::create({}, experts, sources, {"dog", "sheep"}, targets, 1);

  generation::GeneratorExample ex{pair, targets, {{experts[0], pair, action}, {experts[1], pair, calm}}};
  generation::EMTrainConfig em;
  em.one_to_one = true;  // each expert claims a different target
  const auto trained = generation::train_em(model, {ex}, em);
  std::cout << "EM iterations: " << trained.trace.size() << "\n";

  generation::DecoderConfig dc;
  const auto set = generation::generate_set(trained.model, pair, {action, calm}, dc);
  for (std::size_t i = 0; i < set.outputs.size(); ++i)
    std::cout << "expert " << i << ": " << detokenize(set.outputs[i]) << "\n";

  const auto report = metrics::evaluate_all({{pair, set.outputs, targets}}, false, "tour");
  std::cout << metrics::render_table({report});
}
