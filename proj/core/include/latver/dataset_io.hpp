#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latver/model.hpp"
#include "latver/normalization.hpp"
#include "latver/trainer.hpp"
#include "latver/types.hpp"

namespace latver {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kMetadataFile = "metadata.jsonl";
inline constexpr const char* kFeaturesFile = "features.f32";

enum class DecodingStrategy { NaturalCot, Temperature, Beam };
enum class ConfidenceAggregation { Mean, Sum };

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::size_t feature_dim = 0;
  std::size_t pair_count = 0;
  std::string model_name = "synthetic";
  int layer_index = -1;
  std::string template_pos = "This is a true answer.";
  std::string template_neg = "This is a false answer.";
  std::string separator = " ";
  DecodingStrategy decoding = DecodingStrategy::NaturalCot;
  double temperature = 0.0;  // Temperature decoding only
  std::size_t beam_width = 0;  // Beam decoding only
  ConfidenceAggregation confidence_aggregation = ConfidenceAggregation::Mean;
  std::optional<NormalizationStats> normalization;
  std::string created_by = "latver";
  std::string created_at;  // free-form; left empty for byte-reproducible output

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Writes manifest.json, metadata.jsonl and features.f32 under `dir`
/// (created if missing). Each file goes to a temporary name first and is
/// renamed into place. pair_count and feature_dim are taken from `instances`.
void write_dataset(const std::filesystem::path& dir, std::span<const QuestionInstance> instances,
                   DatasetManifest manifest);

/// Questions come back in order of first appearance in metadata.jsonl. A
/// question whose records carry no gold_answer takes the answer of a path
/// labelled true, if any, as its gold answer.
std::pair<std::vector<QuestionInstance>, DatasetManifest> read_dataset(
    const std::filesystem::path& dir);

struct Checkpoint {
  VerifierModel model;
  std::optional<OptimizerState> optimizer;
  NormalizationStats normalization;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace latver
