#pragma once

// Synthetic class-mismatched benchmarks and CSV ingestion of external
// feature datasets.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "upsilon/matrix.hpp"

namespace upsilon {

struct BenchmarkSpec {
  std::size_t k_id = 6;
  std::size_t k_ood = 4;
  std::size_t d = 16;
  // Class means live in the first signal_dim coordinates; the rest is pure
  // noise. 0 uses all d coordinates.
  std::size_t signal_dim = 0;
  std::size_t n_labeled_per_class = 20;
  std::size_t m_unlabeled = 1200;
  std::size_t n_test_per_class = 100;
  double mismatch_ratio = 0.5;
  double class_separation = 3.0;
  double noise_sigma = 1.0;
  // Largest/smallest OOD class size; 1 keeps the OOD classes balanced.
  double ood_imbalance_ratio = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Labeled ID data, the unlabeled pool with its hidden ground truth, and two
// test splits. Ground-truth ids are global: ID classes first, then OOD.
struct MismatchedDataset {
  std::size_t k_id = 0;
  std::size_t k_ood = 0;

  Matrix labeled_x;
  std::vector<std::size_t> labeled_y;

  Matrix unlabeled_x;
  std::vector<std::size_t> unlabeled_truth;  // evaluation/strategy use only
  std::vector<bool> unlabeled_ood;           // evaluation/strategy use only

  Matrix test_id_x;
  std::vector<std::size_t> test_id_y;

  Matrix test_full_x;  // ID and OOD classes
  std::vector<std::size_t> test_full_y;

  std::size_t dim() const { return labeled_x.cols(); }
  std::size_t unlabeled_ood_count() const;

  void validate() const;
};

// Class means are random unit directions (within the signal subspace) scaled
// by class_separation; every class is an isotropic Gaussian with noise_sigma. Exactly
// round(mismatch_ratio * m_unlabeled) unlabeled samples are OOD.
MismatchedDataset generate(const BenchmarkSpec& spec);

class CsvFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvSchema {
  std::string label_column = "label";
  std::string split_column = "split";  // labeled | unlabeled | test
  std::string ood_column = "ood";      // optional 0/1 column
  // 0 infers k_id as 1 + the largest label among labeled rows.
  std::size_t k_id = 0;
};

// Every column other than label/split/ood is a feature. Unlabeled rows may
// leave the label empty (ground truth unknown). Errors name the line number.
MismatchedDataset ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

}  // namespace upsilon
