#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace rtpref {

// Column-wise observation storage shared by the simulator, the estimators,
// and the ingestion pipeline.  `choice` holds +1/-1, `time` the response
// time in seconds.  `features` is a row-major n x dim block and is empty
// (dim = 0) for tabular data.  `drift` carries the realized per-observation
// drifts when the data came from the simulator; real data leave it empty.
struct Dataset {
  std::vector<std::int8_t> choice;
  std::vector<double> time;
  std::vector<double> drift;
  std::vector<double> features;
  std::size_t dim = 0;

  std::size_t size() const { return time.size(); }
  bool has_features() const { return dim > 0; }

  std::span<const double> psi(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }

  // Structural consistency: parallel columns, matching feature block.
  void check() const {
    if (choice.size() != time.size())
      throw std::invalid_argument("choice and time columns differ in length");
    if (!drift.empty() && drift.size() != time.size())
      throw std::invalid_argument("drift column length mismatch");
    if (features.size() != dim * time.size())
      throw std::invalid_argument("feature block does not match n x dim");
    for (std::int8_t z : choice)
      if (z != 1 && z != -1)
        throw std::invalid_argument("choices must be +1 or -1");
  }
};

}  // namespace rtpref
