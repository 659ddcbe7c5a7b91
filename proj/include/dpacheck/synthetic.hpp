#pragma once

// Deterministic synthetic DPA corpus with planted structure: every class has
// its own centroid in embedding space, so a working pipeline separates them
// cleanly. Used by the end-to-end tests and the bundled demo data.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dpacheck/balance.hpp"
#include "dpacheck/corpus.hpp"
#include "dpacheck/embedding.hpp"
#include "dpacheck/preprocess.hpp"

namespace dpacheck::synthetic {

// The 19 processor obligations PO1..PO19, paraphrased.
corpus::ProvisionCatalog processor_catalog();

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t n_dpas = 12;
  std::size_t other_per_dpa = 12;
  std::size_t dim = 64;
  // Centroid norm of keyword vectors and per-component sentence jitter.
  double centroid_scale = 3.0;
  double noise = 0.01;
};

struct SyntheticBundle {
  SyntheticSpec spec;
  corpus::LabeledCorpus corpus;
  preprocess::AliasTable aliases;
  // Keyed by the alias-normalized sentence text; has token and vocabulary
  // sections.
  std::shared_ptr<embedding::EmbeddingStore> store;
  std::vector<balance::SynonymLexicon> lexicons;
  // Word table for the back-translation stub client.
  std::map<std::string, std::string> mt_table;
  // Provisions deliberately left out of each DPA.
  std::map<std::string, std::vector<corpus::ProvisionId>> planted_missing;
};

SyntheticBundle generate(const SyntheticSpec& spec = {});

// Adds one more DPA of exactly n_sentences (embeddings included) covering
// every provision not in `missing` when n_sentences allows it.
corpus::Dpa generate_dpa(SyntheticBundle& bundle, const std::string& dpa_id,
                         std::size_t n_sentences, std::uint64_t seed,
                         const std::vector<corpus::ProvisionId>& missing = {});

// n single-label positive sentences cycling through the provisions.
std::vector<corpus::Sentence> positive_sentences(std::size_t n, std::uint64_t seed);

// catalog.json, ground_truth.jsonl, aliases.tsv, lexicon_*.tsv, mt_table.tsv,
// store.bin.
void write_bundle(const SyntheticBundle& bundle, const std::string& dir);

}  // namespace dpacheck::synthetic
