#pragma once

#include <cstdint>
#include <random>

namespace nngp {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Purpose tags keep streams drawn for different jobs apart even when the
/// numeric coordinates coincide.
enum class StreamPurpose : std::uint64_t {
  PosteriorDraw = 1,
  Bootstrap = 2,
  Generator = 3,
  Replicate = 4,
  Oracle = 5,
};

/// Coordinates of one random stream: imputation (or track) m, pattern k,
/// cycle l and row i.
struct StreamKey {
  StreamPurpose purpose = StreamPurpose::PosteriorDraw;
  std::uint64_t m = 0;
  std::uint64_t k = 0;
  std::uint64_t l = 0;
  std::uint64_t i = 0;

  std::uint64_t id() const noexcept {
    std::uint64_t h = detail::splitmix64(static_cast<std::uint64_t>(purpose));
    for (std::uint64_t part : {m, k, l, i}) h = detail::splitmix64(h ^ part);
    return h;
  }
};

/// Random stream keyed by (seed, stream_id). The sequence depends only on the
/// key, so work can be split across threads in any order and still reproduce
/// the serial result bit for bit.
class RngStream {
 public:
  using result_type = std::mt19937_64::result_type;

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}
  RngStream(std::uint64_t seed, const StreamKey& key) : RngStream(seed, key.id()) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index_below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

 private:
  static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    return std::mt19937_64(seq);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace nngp
