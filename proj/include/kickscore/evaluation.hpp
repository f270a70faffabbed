#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kickscore/labels.hpp"
#include "kickscore/svm.hpp"

namespace kickscore {

/// Rows are true labels, columns predicted, both in `labels` order.
struct ConfusionMatrix {
  std::vector<TechniqueLabel> labels;
  std::vector<std::vector<std::size_t>> counts;

  explicit ConfusionMatrix(std::vector<TechniqueLabel> l)
      : labels(std::move(l)), counts(labels.size(), std::vector<std::size_t>(labels.size(), 0)) {}

  std::size_t index(TechniqueLabel l) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == l) return i;
    throw Error(ErrorCode::InvalidConfig, "label not in matrix: " + std::string(to_string(l)));
  }

  void add(TechniqueLabel truth, TechniqueLabel predicted) { ++counts[index(truth)][index(predicted)]; }

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& r : counts)
      for (auto c : r) t += c;
    return t;
  }

  double accuracy() const {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) ok += counts[i][i];
    const auto t = total();
    return t ? static_cast<double>(ok) / static_cast<double>(t) : 0.0;
  }

  double precision(std::size_t k) const {
    std::size_t col = 0;
    for (const auto& r : counts) col += r[k];
    return col ? static_cast<double>(counts[k][k]) / static_cast<double>(col) : 0.0;
  }

  double recall(std::size_t k) const {
    std::size_t row = 0;
    for (auto c : counts[k]) row += c;
    return row ? static_cast<double>(counts[k][k]) / static_cast<double>(row) : 0.0;
  }

  /// Every diagonal entry exceeds each off-diagonal entry in its row (rows with data only).
  bool row_diagonally_dominant() const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      std::size_t row = 0;
      for (auto c : counts[i]) row += c;
      if (row == 0) continue;
      for (std::size_t j = 0; j < labels.size(); ++j)
        if (j != i && counts[i][j] >= counts[i][i]) return false;
    }
    return true;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << std::setw(16) << "true\\pred";
    for (auto l : labels) os << std::setw(6) << std::string(to_string(l)).substr(0, 5);
    os << "\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
      os << std::setw(16) << to_string(labels[i]);
      for (auto c : counts[i]) os << std::setw(6) << c;
      os << "\n";
    }
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (auto l : labels) j["labels"].push_back(std::string(to_string(l)));
    j["matrix"] = counts;
    j["accuracy"] = accuracy();
    for (std::size_t k = 0; k < labels.size(); ++k)
      j["per_class"].push_back(
          {{"label", std::string(to_string(labels[k]))}, {"precision", precision(k)}, {"recall", recall(k)}});
    j["row_diagonally_dominant"] = row_diagonally_dominant();
    return j;
  }
};

inline ConfusionMatrix confusion(const svm::TechniqueModel& model, std::span<const svm::LabeledSample> data) {
  ConfusionMatrix cm(svm::model_labels(model));
  for (const auto& s : data) cm.add(s.y, svm::predict(model, s.x).label);
  return cm;
}

}  // namespace kickscore
