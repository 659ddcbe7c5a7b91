#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "dpacheck/corpus.hpp"

namespace testing {

// A catalog PO1..POn with placeholder titles.
inline dpacheck::corpus::ProvisionCatalog catalog(std::size_t n = 19) {
  std::vector<dpacheck::corpus::Provision> p;
  for (std::size_t i = 1; i <= n; ++i) {
    const auto id = "PO" + std::to_string(i);
    p.push_back({dpacheck::corpus::ProvisionId(id), "title " + id, "description " + id});
  }
  return dpacheck::corpus::ProvisionCatalog("test regulation", std::move(p));
}

inline dpacheck::corpus::LabeledCorpus parse(const std::string& jsonl,
                                             const dpacheck::corpus::ProvisionCatalog& c) {
  std::istringstream in(jsonl);
  return dpacheck::corpus::parse_ground_truth(in, c, "test.jsonl");
}

// n DPAs named D00.. each with k unlabeled sentences.
inline dpacheck::corpus::LabeledCorpus corpus_of(std::size_t n, std::size_t k = 2) {
  dpacheck::corpus::LabeledCorpus c{catalog(3), {}, ""};
  for (std::size_t d = 0; d < n; ++d) {
    const auto id = std::string("D") + (d < 10 ? "0" : "") + std::to_string(d);
    dpacheck::corpus::Dpa dpa{id, {}};
    for (std::size_t s = 0; s < k; ++s) dpa.sentences.push_back({id, s, "sentence " + std::to_string(s), {}});
    c.dpas.push_back(std::move(dpa));
  }
  return c;
}

}  // namespace testing
