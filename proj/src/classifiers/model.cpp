#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dpacheck/classifiers.hpp"
#include "dpacheck/errors.hpp"
#include "training.hpp"

namespace dpacheck::classifiers {

std::vector<double> linear_scores(Algorithm kind, const LinearParams& params, bool binary,
                                  std::span<const double> x) {
  std::vector<double> z(params.weights.rows);
  for (std::size_t k = 0; k < z.size(); ++k) {
    z[k] = detail::dot(params.weights.row(k), x) + params.bias[k];
  }
  if (kind == Algorithm::kLinearSvm) {
    if (binary) return {z[0], -z[0]};
    return z;
  }
  if (binary) {
    const double p = sigmoid(z[0]);
    return {p, 1.0 - p};
  }
  softmax_inplace(z);
  return z;
}

namespace {

void check_dim(const ClassifierModel& model, std::size_t dim) {
  if (dim != model.input_dim) {
    throw ValidationError("feature dimension " + std::to_string(dim) +
                          " does not match model dimension " + std::to_string(model.input_dim));
  }
}

std::vector<double> forest_votes(const ForestParams& forest, std::size_t classes,
                                 std::span<const double> x) {
  std::vector<double> votes(classes, 0.0);
  for (const auto& tree : forest.trees) votes[argmax(tree_predict(tree, x))] += 1.0;
  for (auto& v : votes) v /= static_cast<double>(forest.trees.size());
  return votes;
}

}  // namespace

std::vector<double> predict_scores(const ClassifierModel& model, std::span<const double> features) {
  check_dim(model, features.size());
  const bool binary = model.task.is_binary();
  switch (model.algorithm) {
    case Algorithm::kLogReg:
    case Algorithm::kLinearSvm:
      return linear_scores(model.algorithm, std::get<LinearParams>(model.params), binary, features);
    case Algorithm::kRandomForest:
      return forest_votes(std::get<ForestParams>(model.params), model.task.num_classes(), features);
    case Algorithm::kMlp:
      return mlp_forward(std::get<MlpParams>(model.params), features);
    case Algorithm::kBiLstm: {
      Matrix seq(1, features.size());
      std::copy(features.begin(), features.end(), seq.data.begin());
      return bilstm_scores(std::get<BiLstmParams>(model.params), seq);
    }
    case Algorithm::kFewShot: {
      const auto& p = std::get<FewShotParams>(model.params);
      std::vector<double> projected(p.projection.rows);
      for (std::size_t k = 0; k < projected.size(); ++k) {
        projected[k] = detail::dot(p.projection.row(k), features) + p.projection_bias[k];
      }
      return linear_scores(Algorithm::kLogReg, p.head, binary, projected);
    }
  }
  throw ValidationError("unknown algorithm");
}

std::vector<double> predict_scores(const ClassifierModel& model, const Matrix& sequence) {
  check_dim(model, sequence.cols);
  if (model.algorithm == Algorithm::kBiLstm) {
    return bilstm_scores(std::get<BiLstmParams>(model.params), sequence);
  }
  if (sequence.rows != 1) {
    throw ValidationError(std::string(algorithm_name(model.algorithm)) +
                          " models take a single feature vector");
  }
  return predict_scores(model, sequence.row(0));
}

double default_threshold(const ClassifierModel& model) {
  return model.algorithm == Algorithm::kLinearSvm ? 0.0 : 0.5;
}

std::size_t decide(const ClassifierModel& model, std::span<const double> scores,
                   std::optional<double> threshold) {
  if (model.task.is_binary()) {
    return scores[0] > threshold.value_or(default_threshold(model)) ? 0 : 1;
  }
  return argmax(scores);
}

ClassifierModel fit(Algorithm algorithm, const TrainingSet& data, const TaskSpec& task,
                    const Hyperparameters& hp, std::uint64_t seed) {
  switch (algorithm) {
    case Algorithm::kLogReg:
    case Algorithm::kLinearSvm:
      return fit_linear(algorithm, data.flat, task, hp, seed);
    case Algorithm::kRandomForest:
      return fit_forest(data.flat, task, hp, seed);
    case Algorithm::kMlp:
      return fit_mlp(data.flat, task, hp, seed);
    case Algorithm::kBiLstm:
      return fit_bilstm(data.sequence_view(), task, hp, seed);
    case Algorithm::kFewShot:
      throw ValidationError("few-shot models are trained with fit_fewshot");
  }
  throw ValidationError("unknown algorithm");
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[8] = {'D', 'P', 'A', 'M', 'O', 'D', 'E', 'L'};

struct Blob {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

class Out {
 public:
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    }
  }
  void f64(double d) { le(std::bit_cast<std::uint64_t>(d)); }
  void str(std::string_view s) {
    le(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void blob(const Blob& b) {
    str(b.name);
    le(static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) le(d);
    for (double v : b.values) f64(v);
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class In {
 public:
  explicit In(std::string_view data) : data_(data) {}
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("model file corrupt at byte " + std::to_string(pos_) + ": " + what);
  }
  std::string_view take(std::size_t n) {
    if (data_.size() - pos_ < n) fail("truncated");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T le() {
    auto s = take(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    }
    return static_cast<T>(v);
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str() { return std::string(take(le<std::uint32_t>())); }
  Blob blob() {
    Blob b;
    b.name = str();
    const auto ndims = le<std::uint32_t>();
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < ndims; ++i) {
      b.shape.push_back(le<std::uint64_t>());
      count *= b.shape.back();
    }
    if (count > (data_.size() - pos_) / 8) fail("blob " + b.name + " exceeds file size");
    b.values.resize(count);
    for (auto& v : b.values) v = f64();
    return b;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

Blob matrix_blob(std::string name, const Matrix& m) {
  return {std::move(name), {m.rows, m.cols}, m.data};
}
Blob vector_blob(std::string name, const std::vector<double>& v) {
  return {std::move(name), {v.size()}, v};
}

void append_linear(std::vector<Blob>& out, const std::string& prefix, const LinearParams& p) {
  out.push_back(matrix_blob(prefix + "weights", p.weights));
  out.push_back(vector_blob(prefix + "bias", p.bias));
}
void append_dense(std::vector<Blob>& out, const std::string& prefix, const DenseLayer& l) {
  out.push_back(matrix_blob(prefix + "weights", l.weights));
  out.push_back(vector_blob(prefix + "bias", l.bias));
}
void append_cell(std::vector<Blob>& out, const std::string& prefix, const LstmCell& c) {
  out.push_back(matrix_blob(prefix + "w", c.w));
  out.push_back(matrix_blob(prefix + "u", c.u));
  out.push_back(vector_blob(prefix + "b", c.b));
}

std::vector<Blob> to_blobs(const ModelParams& params) {
  std::vector<Blob> out;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
          append_linear(out, "", p);
        } else if constexpr (std::is_same_v<T, ForestParams>) {
          for (std::size_t t = 0; t < p.trees.size(); ++t) {
            const auto& nodes = p.trees[t].nodes;
            const std::size_t k = nodes.empty() ? 0 : nodes.front().distribution.size();
            Blob structure{"tree" + std::to_string(t) + ".nodes", {nodes.size(), 4}, {}};
            Blob dist{"tree" + std::to_string(t) + ".distribution", {nodes.size(), k}, {}};
            for (const auto& n : nodes) {
              structure.values.insert(structure.values.end(),
                                      {static_cast<double>(n.feature), n.threshold,
                                       static_cast<double>(n.left), static_cast<double>(n.right)});
              dist.values.insert(dist.values.end(), n.distribution.begin(), n.distribution.end());
            }
            out.push_back(std::move(structure));
            out.push_back(std::move(dist));
          }
        } else if constexpr (std::is_same_v<T, MlpParams>) {
          for (std::size_t l = 0; l < p.layers.size(); ++l) {
            append_dense(out, "layer" + std::to_string(l) + ".", p.layers[l]);
          }
        } else if constexpr (std::is_same_v<T, BiLstmParams>) {
          append_cell(out, "forward.", p.forward);
          append_cell(out, "backward.", p.backward);
          append_dense(out, "output.", p.output);
        } else {
          out.push_back(matrix_blob("projection", p.projection));
          out.push_back(vector_blob("projection_bias", p.projection_bias));
          append_linear(out, "head.", p.head);
        }
      },
      params);
  return out;
}

class BlobReader {
 public:
  explicit BlobReader(std::vector<Blob> blobs) : blobs_(std::move(blobs)) {}

  const Blob& next(const std::string& name, std::size_t ndims) {
    if (pos_ >= blobs_.size()) throw DataError("model file is missing blob " + name);
    const auto& b = blobs_[pos_++];
    if (b.name != name || b.shape.size() != ndims) {
      throw DataError("model file: expected blob " + name + ", found " + b.name);
    }
    return b;
  }
  Matrix matrix(const std::string& name) {
    const auto& b = next(name, 2);
    Matrix m(b.shape[0], b.shape[1]);
    m.data = b.values;
    return m;
  }
  std::vector<double> vector(const std::string& name) { return next(name, 1).values; }
  LinearParams linear(const std::string& prefix) {
    auto w = matrix(prefix + "weights");
    return {std::move(w), vector(prefix + "bias")};
  }
  DenseLayer dense(const std::string& prefix) {
    auto w = matrix(prefix + "weights");
    return {std::move(w), vector(prefix + "bias")};
  }
  LstmCell cell(const std::string& prefix) {
    auto w = matrix(prefix + "w");
    auto u = matrix(prefix + "u");
    return {std::move(w), std::move(u), vector(prefix + "b")};
  }
  bool done() const { return pos_ == blobs_.size(); }
  std::size_t remaining() const { return blobs_.size() - pos_; }

 private:
  std::vector<Blob> blobs_;
  std::size_t pos_ = 0;
};

ModelParams from_blobs(Algorithm algorithm, std::vector<Blob> blobs) {
  BlobReader r(std::move(blobs));
  ModelParams params;
  switch (algorithm) {
    case Algorithm::kLogReg:
    case Algorithm::kLinearSvm:
      params = r.linear("");
      break;
    case Algorithm::kRandomForest: {
      ForestParams forest;
      for (std::size_t t = 0; !r.done(); ++t) {
        const auto structure = r.matrix("tree" + std::to_string(t) + ".nodes");
        const auto dist = r.matrix("tree" + std::to_string(t) + ".distribution");
        Tree tree;
        for (std::size_t i = 0; i < structure.rows; ++i) {
          TreeNode n;
          n.feature = static_cast<int>(structure(i, 0));
          n.threshold = structure(i, 1);
          n.left = static_cast<std::uint32_t>(structure(i, 2));
          n.right = static_cast<std::uint32_t>(structure(i, 3));
          n.distribution.assign(dist.row(i).begin(), dist.row(i).end());
          if (n.feature >= 0 && (n.left >= structure.rows || n.right >= structure.rows)) {
            throw DataError("model file: tree node points outside the tree");
          }
          tree.nodes.push_back(std::move(n));
        }
        forest.trees.push_back(std::move(tree));
      }
      params = std::move(forest);
      break;
    }
    case Algorithm::kMlp: {
      MlpParams mlp;
      for (std::size_t l = 0; !r.done(); ++l) mlp.layers.push_back(r.dense("layer" + std::to_string(l) + "."));
      params = std::move(mlp);
      break;
    }
    case Algorithm::kBiLstm: {
      BiLstmParams p;
      p.forward = r.cell("forward.");
      p.backward = r.cell("backward.");
      p.output = r.dense("output.");
      params = std::move(p);
      break;
    }
    case Algorithm::kFewShot: {
      FewShotParams p;
      p.projection = r.matrix("projection");
      p.projection_bias = r.vector("projection_bias");
      p.head = r.linear("head.");
      params = std::move(p);
      break;
    }
  }
  if (!r.done()) throw DataError("model file has unexpected trailing blobs");
  return params;
}

}  // namespace

std::string serialize_models(const std::vector<ClassifierModel>& models) {
  Out out;
  for (char c : kMagic) out.le(static_cast<std::uint8_t>(c));
  out.le(kModelFormatVersion);
  out.le(static_cast<std::uint32_t>(models.size()));
  for (const auto& m : models) {
    out.str(algorithm_name(m.algorithm));
    out.le(static_cast<std::uint8_t>(m.task.is_binary() ? 0 : 1));
    out.le(static_cast<std::uint32_t>(m.task.classes.size()));
    for (const auto& c : m.task.classes) out.str(c);
    out.str(m.hyperparameters.to_json());
    out.le(m.meta.seed);
    out.le(static_cast<std::uint32_t>(m.meta.epochs_run));
    out.f64(m.meta.final_loss);
    out.str(m.meta.shots_source);
    out.le(static_cast<std::uint64_t>(m.meta.shots_per_class));
    out.le(static_cast<std::uint64_t>(m.meta.pairs_per_example));
    out.le(static_cast<std::uint64_t>(m.input_dim));
    const auto blobs = to_blobs(m.params);
    out.le(static_cast<std::uint32_t>(blobs.size()));
    for (const auto& b : blobs) out.blob(b);
  }
  return out.take();
}

std::vector<ClassifierModel> parse_models(std::string_view bytes) {
  In in(bytes);
  if (in.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) in.fail("bad magic");
  if (auto v = in.le<std::uint32_t>(); v != kModelFormatVersion) {
    in.fail("unsupported version " + std::to_string(v));
  }
  const auto count = in.le<std::uint32_t>();
  std::vector<ClassifierModel> models;
  for (std::uint32_t i = 0; i < count; ++i) {
    ClassifierModel m;
    m.algorithm = parse_algorithm(in.str());
    m.task.mode = in.le<std::uint8_t>() == 0 ? TaskMode::kBinary : TaskMode::kMulticlass;
    const auto n_classes = in.le<std::uint32_t>();
    for (std::uint32_t c = 0; c < n_classes; ++c) m.task.classes.push_back(in.str());
    m.task.validate();
    m.hyperparameters = Hyperparameters::from_json(in.str());
    m.meta.seed = in.le<std::uint64_t>();
    m.meta.epochs_run = static_cast<int>(in.le<std::uint32_t>());
    m.meta.final_loss = in.f64();
    m.meta.shots_source = in.str();
    m.meta.shots_per_class = in.le<std::uint64_t>();
    m.meta.pairs_per_example = in.le<std::uint64_t>();
    m.input_dim = in.le<std::uint64_t>();
    const auto n_blobs = in.le<std::uint32_t>();
    std::vector<Blob> blobs;
    for (std::uint32_t b = 0; b < n_blobs; ++b) blobs.push_back(in.blob());
    m.params = from_blobs(m.algorithm, std::move(blobs));
    models.push_back(std::move(m));
  }
  if (!in.at_end()) in.fail("trailing bytes");
  return models;
}

void save_models(const std::vector<ClassifierModel>& models, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path);
  const auto bytes = serialize_models(models);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<ClassifierModel> load_models(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_models(buf.str());
}

}  // namespace dpacheck::classifiers
