#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmdx/chunker.hpp"
#include "lmdx/document.hpp"

namespace lmdx {

// Deterministic text embedder. tag() identifies the embedding function so
// cached vectors can be validated before reuse.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string tag() const = 0;
};

// Token-hashing embedder: each whitespace token is FNV-1a-64 hashed and
// counted into hash % dimension. Cheap, deterministic, and good enough to
// rank near-duplicate documents for exemplar retrieval.
std::unique_ptr<Embedder> make_hash_embedder(std::size_t dimension = 64);

// Cosine similarity; both vectors must be same-dimension and non-zero.
double cosine(std::span<const double> a, std::span<const double> b);

// Segment texts of every page joined with newlines: the text embeddings see.
std::string document_embedding_text(const Document& doc);

struct Exemplar {
  Document document;
  std::string completion_text;
  std::vector<double> embedding;
};

struct ExemplarPool {
  std::vector<Exemplar> exemplars;
};

// Draws min(n, pool size) distinct exemplars without replacement. The
// generator is pinned so selections are reproducible from the seed alone:
// std::mt19937_64 g(seed); for i in 0..n-1: swap indices[i] and
// indices[i + g() % (size - i)]; take the first n.
std::vector<Exemplar> select_random(const ExemplarPool& pool, std::size_t n,
                                    std::uint64_t seed);

// Ranks the pool by cosine similarity between each exemplar's embedding and
// the target document's text embedding; descending, ties by pool index.
std::vector<Exemplar> select_nearest(const ExemplarPool& pool,
                                     const Document& target, std::size_t n,
                                     const Embedder& embedder);

// Whole document as a single chunk (exemplars are never split).
DocumentChunk exemplar_chunk(const Document& doc, SegmentLevel level);

// Pool file: JSON list of {"document": path, "completion": path,
// "embedding": [floats], "embedder": tag}. Paths resolve relative to the
// pool file. A ".json" completion is parsed and rendered with `json_indent`;
// any other extension is included verbatim. Cached embeddings are reused only
// when the tag and dimension match `embedder`; otherwise they are recomputed.
ExemplarPool load_pool_file(const std::string& path, const Embedder& embedder,
                            int json_indent = 0);

}  // namespace lmdx
