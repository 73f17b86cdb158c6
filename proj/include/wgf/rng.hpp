#pragma once

#include <cstdint>
#include <vector>

namespace wgf {

// PCG32 (XSH-RR variant) with a Box-Muller normal on top. One Rng per logical
// stream: (seed, stream) pairs give statistically independent, reproducible
// sequences, so parallel stages of an experiment each derive their own stream
// id from a fixed layout instead of sharing state.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint32_t next_u32();

    // Uniform on [0,1) with 53 random bits.
    double uniform();
    // Uniform integer on [0, n), unbiased (Lemire rejection). n > 0.
    std::uint64_t uniform_index(std::uint64_t n);
    // Standard normal; pairs generated by Box-Muller, one cached.
    double normal();

    void fill_normal(double* out, std::size_t n);
    std::vector<double> normal_vec(std::size_t n);

  private:
    std::uint64_t state_;
    std::uint64_t inc_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace wgf
