#include "lmdx/icl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lmdx/error.hpp"
#include "lmdx/prompt.hpp"

namespace lmdx {

namespace {

std::uint64_t fnv1a_64(std::string_view token) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) {
      fail(ErrorCode::config_error, "embedding dimension must be positive");
    }
  }

  std::vector<double> embed(std::string_view text) const override {
    std::vector<double> vec(dimension_, 0.0);
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() &&
             std::isspace(static_cast<unsigned char>(text[i]))) {
        ++i;
      }
      std::size_t start = i;
      while (i < text.size() &&
             !std::isspace(static_cast<unsigned char>(text[i]))) {
        ++i;
      }
      if (i > start) {
        vec[fnv1a_64(text.substr(start, i - start)) % dimension_] += 1.0;
      }
    }
    return vec;
  }

  std::size_t dimension() const override { return dimension_; }

  std::string tag() const override {
    return "fnv1a64-" + std::to_string(dimension_);
  }

 private:
  std::size_t dimension_;
};

}  // namespace

std::unique_ptr<Embedder> make_hash_embedder(std::size_t dimension) {
  return std::make_unique<HashEmbedder>(dimension);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::out_of_range,
         "embedding dimensions differ: " + std::to_string(a.size()) + " vs " +
             std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    fail(ErrorCode::zero_vector, "cosine of a zero vector is undefined");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string document_embedding_text(const Document& doc) {
  std::string out;
  bool first = true;
  for (const auto& page : doc.pages) {
    for (const auto& seg : page.segments) {
      if (!first) out += '\n';
      out += seg.text;
      first = false;
    }
  }
  return out;
}

std::vector<Exemplar> select_random(const ExemplarPool& pool, std::size_t n,
                                    std::uint64_t seed) {
  const std::size_t size = pool.exemplars.size();
  const std::size_t take = std::min(n, size);
  std::vector<std::size_t> indices(size);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  std::mt19937_64 gen(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(gen() % (size - i));
    std::swap(indices[i], indices[j]);
  }
  std::vector<Exemplar> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back(pool.exemplars[indices[i]]);
  }
  return out;
}

std::vector<Exemplar> select_nearest(const ExemplarPool& pool,
                                     const Document& target, std::size_t n,
                                     const Embedder& embedder) {
  const std::vector<double> target_vec =
      embedder.embed(document_embedding_text(target));
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(pool.exemplars.size());
  for (std::size_t i = 0; i < pool.exemplars.size(); ++i) {
    ranked.emplace_back(cosine(pool.exemplars[i].embedding, target_vec), i);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  const std::size_t take = std::min(n, ranked.size());
  std::vector<Exemplar> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back(pool.exemplars[ranked[i].second]);
  }
  return out;
}

DocumentChunk exemplar_chunk(const Document& doc, SegmentLevel level) {
  DocumentChunk chunk;
  chunk.doc_id = doc.doc_id;
  chunk.source_page_index = 0;
  chunk.chunk_index = 0;
  chunk.first_segment_index = 0;
  for (const auto& page : doc.pages) {
    auto segs = segments_at_level(page, level);
    for (auto& s : segs) chunk.segments.push_back(std::move(s));
  }
  return chunk;
}

ExemplarPool load_pool_file(const std::string& path, const Embedder& embedder,
                            int json_indent) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open pool file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::malformed_input,
         "pool file is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_array()) {
    fail(ErrorCode::malformed_input, "pool file must be a JSON list");
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  ExemplarPool pool;
  for (const auto& entry : j) {
    if (!entry.is_object() || !entry.contains("document") ||
        !entry["document"].is_string() || !entry.contains("completion") ||
        !entry["completion"].is_string()) {
      fail(ErrorCode::malformed_input,
           "pool entries need document and completion paths");
    }
    Exemplar ex;
    ex.document = load_document_file(resolve(entry["document"].get<std::string>()));

    const std::string completion_path =
        resolve(entry["completion"].get<std::string>());
    std::ifstream cin_file(completion_path, std::ios::binary);
    if (!cin_file) {
      fail(ErrorCode::io_error, "cannot open completion file: " + completion_path);
    }
    std::stringstream buffer;
    buffer << cin_file.rdbuf();
    if (completion_path.size() > 5 &&
        completion_path.substr(completion_path.size() - 5) == ".json") {
      nlohmann::ordered_json tree;
      try {
        tree = nlohmann::ordered_json::parse(buffer.str());
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::malformed_input, "completion file " + completion_path +
                                             " is not valid JSON: " + e.what());
      }
      ex.completion_text = render_completion(tree, json_indent);
    } else {
      ex.completion_text = buffer.str();
    }

    bool cached = false;
    if (entry.contains("embedding") && entry["embedding"].is_array() &&
        entry.value("embedder", std::string{}) == embedder.tag() &&
        entry["embedding"].size() == embedder.dimension()) {
      ex.embedding.reserve(embedder.dimension());
      cached = true;
      for (const auto& v : entry["embedding"]) {
        if (!v.is_number()) {
          cached = false;
          ex.embedding.clear();
          break;
        }
        ex.embedding.push_back(v.get<double>());
      }
    }
    if (!cached) {
      ex.embedding = embedder.embed(document_embedding_text(ex.document));
    }
    pool.exemplars.push_back(std::move(ex));
  }
  return pool;
}

}  // namespace lmdx
