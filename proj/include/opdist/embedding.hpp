#pragma once

#include <map>
#include <string>
#include <vector>

namespace opdist {

struct EmbeddingVector {
  std::string id;
  std::vector<double> values;
  std::string model_tag;
};

using EmbeddingMap = std::map<std::string, EmbeddingVector, std::less<>>;

// u.v / (|u||v|). Throws ValidationError on dimension mismatch or a zero-norm input.
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

}  // namespace opdist
