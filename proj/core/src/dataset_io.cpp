#include "latver/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

namespace latver {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

// ---- little-endian byte helpers ---------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class ByteReader {
 public:
  ByteReader(const std::string& data, ErrorKind short_read) : data_(data), short_read_(short_read) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(pos_ + i)) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte(pos_ + i)) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  unsigned char byte(std::size_t i) const { return static_cast<unsigned char>(data_[i]); }
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(short_read_, "unexpected end of data");
  }
  const std::string& data_;
  ErrorKind short_read_;
  std::size_t pos_ = 0;
};

// ---- file helpers -------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoError, "read failed for '" + path.string() + "'");
  return std::move(ss).str();
}

// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot create '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "rename to '" + path.string() + "' failed: " + ec.message());
}

// ---- manifest -----------------------------------------------------------------

std::string_view decoding_name(DecodingStrategy d) {
  switch (d) {
    case DecodingStrategy::NaturalCot: return "natural_cot";
    case DecodingStrategy::Temperature: return "temperature";
    case DecodingStrategy::Beam: return "beam";
  }
  return "natural_cot";
}

DecodingStrategy parse_decoding(const std::string& s) {
  if (s == "natural_cot") return DecodingStrategy::NaturalCot;
  if (s == "temperature") return DecodingStrategy::Temperature;
  if (s == "beam") return DecodingStrategy::Beam;
  throw Error(ErrorKind::InconsistentManifest, "unknown decoding strategy '" + s + "'");
}

ordered_json stats_to_json(const NormalizationStats& stats) {
  ordered_json j;
  j["mode"] = std::string(to_string(stats.mode));
  j["pos_mean"] = stats.pos_mean;
  j["neg_mean"] = stats.neg_mean;
  j["scale"] = stats.scale;
  return j;
}

NormalizationStats stats_from_json(const json& j) {
  NormalizationStats s;
  s.mode = parse_normalization_mode(j.at("mode").get<std::string>());
  s.pos_mean = j.at("pos_mean").get<std::vector<double>>();
  s.neg_mean = j.at("neg_mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  return s;
}

std::string manifest_to_text(const DatasetManifest& m) {
  ordered_json j;
  j["format_version"] = m.format_version;
  j["feature_dim"] = m.feature_dim;
  j["pair_count"] = m.pair_count;
  j["feature_dtype"] = "float32_le";
  j["model_name"] = m.model_name;
  j["layer_index"] = m.layer_index;
  j["template_pos"] = m.template_pos;
  j["template_neg"] = m.template_neg;
  j["separator"] = m.separator;
  ordered_json dec;
  dec["strategy"] = std::string(decoding_name(m.decoding));
  if (m.decoding == DecodingStrategy::Temperature) dec["temperature"] = m.temperature;
  if (m.decoding == DecodingStrategy::Beam) dec["beam_width"] = m.beam_width;
  j["decoding"] = dec;
  j["confidence_aggregation"] = m.confidence_aggregation == ConfidenceAggregation::Mean ? "mean" : "sum";
  j["normalization"] = m.normalization ? stats_to_json(*m.normalization) : ordered_json(nullptr);
  j["created_by"] = m.created_by;
  j["created_at"] = m.created_at;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InconsistentManifest, std::string("manifest is not valid JSON: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      throw Error(ErrorKind::VersionUnsupported,
                  "dataset format_version " + std::to_string(m.format_version) + " is not supported");
    }
    if (j.value("feature_dtype", std::string("float32_le")) != "float32_le") {
      throw Error(ErrorKind::InconsistentManifest, "feature_dtype must be float32_le");
    }
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    m.pair_count = j.at("pair_count").get<std::size_t>();
    m.model_name = j.value("model_name", m.model_name);
    m.layer_index = j.value("layer_index", m.layer_index);
    m.template_pos = j.value("template_pos", m.template_pos);
    m.template_neg = j.value("template_neg", m.template_neg);
    m.separator = j.value("separator", m.separator);
    if (j.contains("decoding") && j["decoding"].is_object()) {
      const auto& dec = j["decoding"];
      m.decoding = parse_decoding(dec.value("strategy", std::string("natural_cot")));
      m.temperature = dec.value("temperature", 0.0);
      m.beam_width = dec.value("beam_width", std::size_t{0});
    }
    const std::string agg = j.value("confidence_aggregation", std::string("mean"));
    if (agg != "mean" && agg != "sum") {
      throw Error(ErrorKind::InconsistentManifest, "unknown confidence_aggregation '" + agg + "'");
    }
    m.confidence_aggregation = agg == "mean" ? ConfidenceAggregation::Mean : ConfidenceAggregation::Sum;
    if (j.contains("normalization") && !j["normalization"].is_null()) {
      m.normalization = stats_from_json(j["normalization"]);
    }
    m.created_by = j.value("created_by", m.created_by);
    m.created_at = j.value("created_at", std::string{});
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InconsistentManifest, std::string("manifest field error: ") + e.what());
  }
  if (m.feature_dim == 0) throw Error(ErrorKind::InconsistentManifest, "feature_dim must be positive");
  return m;
}

}  // namespace

// ---- dataset --------------------------------------------------------------------

void write_dataset(const fs::path& dir, std::span<const QuestionInstance> instances,
                   DatasetManifest manifest) {
  if (instances.empty()) throw Error(ErrorKind::EmptyDataset, "write_dataset: no questions");
  const std::size_t dim = dataset_feature_dim(instances);
  std::size_t pairs = 0;
  for (const auto& q : instances) {
    validate_instance(q);
    pairs += q.path_count();
  }
  if (manifest.feature_dim != 0 && manifest.feature_dim != dim) {
    throw Error(ErrorKind::InconsistentManifest, "manifest feature_dim " +
                                                     std::to_string(manifest.feature_dim) +
                                                     " != data dim " + std::to_string(dim));
  }
  if (manifest.pair_count != 0 && manifest.pair_count != pairs) {
    throw Error(ErrorKind::InconsistentManifest, "manifest pair_count " +
                                                     std::to_string(manifest.pair_count) +
                                                     " != data pair count " + std::to_string(pairs));
  }
  if (manifest.format_version != kDatasetFormatVersion) {
    throw Error(ErrorKind::VersionUnsupported, "can only write format_version " +
                                                   std::to_string(kDatasetFormatVersion));
  }
  manifest.feature_dim = dim;
  manifest.pair_count = pairs;

  std::string blob;
  blob.reserve(pairs * dim * 2 * sizeof(float));
  std::string meta;
  std::size_t row = 0;
  for (const auto& q : instances) {
    for (const auto& p : q.pairs) {
      ordered_json rec;
      rec["question_id"] = p.question_id;
      rec["path_index"] = p.path_index;
      rec["answer_key"] = p.answer_key.is_none() ? ordered_json(nullptr) : ordered_json(p.answer_key.str());
      if (p.answer_confidence) rec["answer_confidence"] = *p.answer_confidence;
      if (p.gold_label) rec["gold_label"] = *p.gold_label;
      if (q.gold_answer) {
        rec["gold_answer"] =
            q.gold_answer->is_none() ? ordered_json(nullptr) : ordered_json(q.gold_answer->str());
      }
      rec["pos_row"] = row;
      rec["neg_row"] = row + 1;
      meta += rec.dump();
      meta.push_back('\n');
      for (float v : p.pos_features.values()) put_f32(blob, v);
      for (float v : p.neg_features.values()) put_f32(blob, v);
      row += 2;
    }
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create '" + dir.string() + "': " + ec.message());
  write_file_atomic(dir / kFeaturesFile, blob);
  write_file_atomic(dir / kMetadataFile, meta);
  write_file_atomic(dir / kManifestFile, manifest_to_text(manifest));
}

std::pair<std::vector<QuestionInstance>, DatasetManifest> read_dataset(const fs::path& dir) {
  DatasetManifest manifest = manifest_from_text(read_file(dir / kManifestFile));
  const std::size_t dim = manifest.feature_dim;
  const std::size_t rows = manifest.pair_count * 2;

  const std::string blob = read_file(dir / kFeaturesFile);
  const std::size_t expected = rows * dim * sizeof(float);
  if (blob.size() != expected) {
    throw Error(ErrorKind::BlobSizeMismatch, "features blob is " + std::to_string(blob.size()) +
                                                 " bytes, expected " + std::to_string(expected) +
                                                 " (pairs=" + std::to_string(manifest.pair_count) +
                                                 ", dim=" + std::to_string(dim) + ")");
  }
  auto row_vector = [&](std::size_t r) {
    std::vector<float> v(dim);
    std::uint32_t bits;
    for (std::size_t j = 0; j < dim; ++j) {
      const std::size_t at = (r * dim + j) * sizeof(float);
      bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[at + b])) << (8 * b);
      }
      v[j] = std::bit_cast<float>(bits);
    }
    return FeatureVector(std::move(v));
  };

  const std::string meta = read_file(dir / kMetadataFile);
  std::vector<std::string> order;
  std::map<std::string, std::vector<AssertionPair>> by_question;
  std::map<std::string, std::optional<AnswerKey>> gold;
  std::size_t records = 0;
  std::istringstream lines(meta);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++records;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedInput,
                  "metadata line " + std::to_string(records) + " is not valid JSON: " + e.what());
    }
    AssertionPair p;
    std::size_t pos_row = 0, neg_row = 0;
    std::optional<AnswerKey> gold_answer;
    try {
      p.question_id = rec.at("question_id").get<std::string>();
      p.path_index = rec.at("path_index").get<std::size_t>();
      const auto& key = rec.at("answer_key");
      p.answer_key = key.is_null() ? AnswerKey::none() : AnswerKey(key.get<std::string>());
      if (rec.contains("answer_confidence") && !rec["answer_confidence"].is_null()) {
        p.answer_confidence = rec["answer_confidence"].get<double>();
      }
      if (rec.contains("gold_label") && !rec["gold_label"].is_null()) {
        p.gold_label = rec["gold_label"].get<bool>();
      }
      if (rec.contains("gold_answer")) {
        const auto& g = rec["gold_answer"];
        gold_answer = g.is_null() ? AnswerKey::none() : AnswerKey(g.get<std::string>());
      }
      pos_row = rec.at("pos_row").get<std::size_t>();
      neg_row = rec.at("neg_row").get<std::size_t>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedInput,
                  "metadata line " + std::to_string(records) + ": " + e.what());
    }
    if (pos_row >= rows || neg_row >= rows) {
      throw Error(ErrorKind::BadRowIndex, "metadata line " + std::to_string(records) +
                                              ": row index out of range (rows=" +
                                              std::to_string(rows) + ")");
    }
    p.pos_features = row_vector(pos_row);
    p.neg_features = row_vector(neg_row);

    auto [it, inserted] = by_question.try_emplace(p.question_id);
    if (inserted) order.push_back(p.question_id);
    if (gold_answer && !gold.count(p.question_id)) gold[p.question_id] = gold_answer;
    it->second.push_back(std::move(p));
  }
  if (records != manifest.pair_count) {
    throw Error(ErrorKind::InconsistentManifest, "metadata has " + std::to_string(records) +
                                                     " records, manifest pair_count is " +
                                                     std::to_string(manifest.pair_count));
  }

  std::vector<QuestionInstance> instances;
  instances.reserve(order.size());
  for (const auto& qid : order) {
    auto& pairs = by_question[qid];
    std::optional<AnswerKey> g;
    if (auto it = gold.find(qid); it != gold.end()) {
      g = it->second;
    } else {
      for (const auto& p : pairs) {
        if (p.gold_label && *p.gold_label) {
          g = p.answer_key;
          break;
        }
      }
    }
    instances.push_back(group_by_answer(std::move(pairs), std::move(g)));
  }
  return {std::move(instances), std::move(manifest)};
}

// ---- checkpoints ------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'L', 'V', 'C', 'K', 'P', 'T', '\0', '\1'};

template <class M>
void put_matrix(std::string& out, const M& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  }
}

template <class M>
void get_matrix(ByteReader& in, M& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.f64();
  }
}

void put_params(std::string& out, const Matrix& w1, const Vector& b1, const Matrix& w2,
                const Vector& b2, const RowVector& w3, double b3) {
  put_matrix(out, w1);
  put_matrix(out, b1);
  put_matrix(out, w2);
  put_matrix(out, b2);
  put_matrix(out, w3);
  put_f64(out, b3);
}

template <class T>
void get_params(ByteReader& in, T& p, std::size_t d, std::size_t h1, std::size_t h2) {
  const auto di = static_cast<Eigen::Index>(d);
  const auto h1i = static_cast<Eigen::Index>(h1);
  const auto h2i = static_cast<Eigen::Index>(h2);
  p.w1.resize(h1i, di);
  p.b1.resize(h1i);
  p.w2.resize(h2i, h1i);
  p.b2.resize(h2i);
  p.w3.resize(h2i);
  get_matrix(in, p.w1);
  get_matrix(in, p.b1);
  get_matrix(in, p.w2);
  get_matrix(in, p.b2);
  get_matrix(in, p.w3);
  p.b3 = in.f64();
}

}  // namespace

void write_checkpoint(const fs::path& path, const Checkpoint& ck) {
  ck.model.validate();
  const VerifierModel& m = ck.model;
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointFormatVersion);
  put_u32(out, ck.optimizer ? 1u : 0u);
  put_u64(out, m.input_dim());
  put_u64(out, m.hidden1());
  put_u64(out, m.hidden2());
  put_params(out, m.w1, m.b1, m.w2, m.b2, m.w3, m.b3);
  if (ck.optimizer) {
    const OptimizerState& s = *ck.optimizer;
    put_u64(out, s.step);
    put_params(out, s.m.w1, s.m.b1, s.m.w2, s.m.b2, s.m.w3, s.m.b3);
    put_params(out, s.v.w1, s.v.b1, s.v.w2, s.v.b2, s.v.w3, s.v.b3);
  }
  const NormalizationStats& ns = ck.normalization;
  put_u32(out, ns.mode == NormalizationMode::None ? 0u : 1u);
  put_u64(out, ns.pos_mean.size());
  if (ns.mode != NormalizationMode::None) {
    if (ns.neg_mean.size() != ns.pos_mean.size() || ns.scale.size() != ns.pos_mean.size() ||
        ns.pos_mean.size() != m.input_dim()) {
      throw Error(ErrorKind::ShapeMismatch, "normalization statistics do not match model input dim");
    }
    for (double v : ns.pos_mean) put_f64(out, v);
    for (double v : ns.neg_mean) put_f64(out, v);
    for (double v : ns.scale) put_f64(out, v);
  }
  write_file_atomic(path, out);
}

Checkpoint read_checkpoint(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw Error(ErrorKind::MalformedInput, "'" + path.string() + "' is not a checkpoint file");
  }
  const std::string body = bytes.substr(sizeof kCheckpointMagic);
  ByteReader in(body, ErrorKind::ShapeCorruption);
  const std::uint32_t version = in.u32();
  if (version != kCheckpointFormatVersion) {
    throw Error(ErrorKind::VersionUnsupported, "checkpoint version " + std::to_string(version) +
                                                   " is not supported");
  }
  const std::uint32_t flags = in.u32();
  if (flags > 1u) throw Error(ErrorKind::ShapeCorruption, "unknown checkpoint flags");
  const std::uint64_t d = in.u64();
  const std::uint64_t h1 = in.u64();
  const std::uint64_t h2 = in.u64();
  if (d == 0 || h1 == 0 || h2 == 0) throw Error(ErrorKind::ShapeCorruption, "zero layer width");

  // Every size after the header is determined by the widths; check before allocating.
  const std::uint64_t params = h1 * d + h1 + h2 * h1 + h2 + h2 + 1;
  if (h1 > (1ull << 24) || d > (1ull << 24) || h2 > (1ull << 24) ||
      params * 8 > in.remaining()) {
    throw Error(ErrorKind::ShapeCorruption, "layer widths do not match checkpoint size");
  }

  Checkpoint ck;
  get_params(in, ck.model, d, h1, h2);
  if (flags & 1u) {
    OptimizerState s;
    s.step = in.u64();
    get_params(in, s.m, d, h1, h2);
    get_params(in, s.v, d, h1, h2);
    ck.optimizer = std::move(s);
  }
  const std::uint32_t mode = in.u32();
  const std::uint64_t ndim = in.u64();
  if (mode > 1u) throw Error(ErrorKind::ShapeCorruption, "unknown normalization mode tag");
  ck.normalization.mode = mode == 0 ? NormalizationMode::None : NormalizationMode::PerTemplateCenterScale;
  if (mode == 1u) {
    if (ndim != d || ndim * 3 * 8 != in.remaining()) {
      throw Error(ErrorKind::ShapeCorruption, "normalization block does not match widths");
    }
    for (auto* vec : {&ck.normalization.pos_mean, &ck.normalization.neg_mean, &ck.normalization.scale}) {
      vec->resize(ndim);
      for (auto& v : *vec) v = in.f64();
    }
  } else if (ndim != 0) {
    throw Error(ErrorKind::ShapeCorruption, "normalization block does not match widths");
  }
  if (in.remaining() != 0) {
    throw Error(ErrorKind::ShapeCorruption, "layer widths do not match checkpoint size");
  }
  ck.model.validate();
  return ck;
}

}  // namespace latver
