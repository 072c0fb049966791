#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "yflow/rng.hpp"
#include "yflow/tensor.hpp"

namespace yflow {

enum class DatasetKind { BranchMixture, Csv };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::BranchMixture;
  std::size_t d = 2;
  std::size_t n_branches = 2;
  std::size_t samples_per_side = 4096;  // pool size used by evaluation draws
  std::array<double, 2> source_center{0.0, -4.0};
  double cluster_std = 0.3;
  double target_y = 4.0;        // branch centers sit on this horizontal line
  double target_x_min = -4.0;   // ... equally spaced over [x_min, x_max]
  double target_x_max = 4.0;
  std::uint64_t seed = 0;
  std::string csv_source;
  std::string csv_target;
  bool csv_has_header = false;
  bool csv_standardize = false;

  void validate() const;
};

enum class Side { Source, Target };

struct SampleBatch {
  Tensor x;
  Side side = Side::Source;
  std::vector<std::size_t> branch_labels;  // target mixtures only
};

// Branch centers implied by the spec: one center at x=0 for a single branch,
// otherwise equally spaced endpoints-inclusive across [x_min, x_max].
std::vector<std::array<double, 2>> branch_centers(const DatasetSpec& spec);

// Deterministic stream of draws for one side of the mixture; a fresh sampler
// built from the same spec replays the identical stream.
class MixtureSampler {
 public:
  MixtureSampler(const DatasetSpec& spec, Side side);
  SampleBatch draw(std::size_t n);

 private:
  DatasetSpec spec_;
  Side side_;
  std::vector<std::array<double, 2>> centers_;
  Pcg64 rng_;
};

std::pair<MixtureSampler, MixtureSampler> make_branch_mixture(const DatasetSpec& spec);

// CSV ingestion: comma-separated doubles, '.' decimal, LF or CRLF, optional
// single header line. Malformed content raises config_error.
Tensor parse_csv(const std::string& text, bool has_header);
Tensor load_csv_file(const std::string& path, bool has_header);
void save_csv(const std::string& path, const Tensor& x,
              const std::vector<std::string>& header = {});

// In-place per-column standardization to mean 0, population std 1;
// zero-variance columns are only centered.
void standardize_columns(Tensor& x);

// Both sides of a csv-kind spec, standardized when the spec says so.
std::pair<SampleBatch, SampleBatch> load_csv(const DatasetSpec& spec);

// Seed-deterministic shuffle split; both sides nonempty or config_error.
std::pair<SampleBatch, SampleBatch> train_test_split(const SampleBatch& batch,
                                                     double fraction, std::uint64_t seed);

}  // namespace yflow
