#pragma once

// Full synthetic datasets (structured variables plus text) and their
// newline-delimited JSON file format.
//
// Line 1 is the metadata object; every following line is one record
//   {"c":0,"u":1,"a":1,"y":0,"tokens":[3,1,4]}
// Keys are always written in the same order and doubles in their shortest
// round-trip form, so equal datasets produce identical bytes.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "textcausal/structured.hpp"
#include "textcausal/textgen.hpp"

namespace textcausal {

inline constexpr const char* kDatasetFormat = "textcausal.dataset.v1";

struct DatasetRecord {
  int c = 0;
  int u = 0;
  int a = 0;
  int y = 0;
  TokenSequence tokens;

  [[nodiscard]] StructuredSample structured() const { return {c, u, a, y}; }
  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct DatasetMetadata {
  DgpKind dgp = DgpKind::kTrivial;
  std::string source;
  Vocab vocab;
  StructuredParams structured;
  TextEffectConfig effects;
  Seed sample_seed = 0;
  std::size_t length = 0;
  double word_tau_correlation = 1.0;
  std::optional<double> second_tau_correlation;
};

struct Dataset {
  DatasetMetadata meta;
  std::vector<DatasetRecord> records;

  [[nodiscard]] std::size_t size() const { return records.size(); }
  [[nodiscard]] std::vector<StructuredSample> structured() const;
  // Records at the given positions, metadata shared.
  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& indices) const;
};

// Record i uses seeds derived from (seed, i) only, so the output does not
// depend on the worker count.
Dataset generate_dataset(const StructuredParams& structured, const TextGenerator& generator, std::size_t n,
                         Seed seed, std::size_t workers = 1);

std::string serialize_dataset(const Dataset& dataset);
// Throws std::runtime_error with the offending line number on malformed input.
Dataset parse_dataset(std::string_view text);

void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace textcausal
