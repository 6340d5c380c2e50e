#ifndef MESHLINK_RNG_HPP
#define MESHLINK_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace meshlink {

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives an independent sub-seed from a root seed and a path of indices.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept
{
    std::uint64_t s = mix64(root);
    for (auto p : path)
    {
        s = mix64(s ^ mix64(p + 0x632BE59BD9B4E019ULL));
    }
    return s;
}

/// Seeded randomness source. The engine is fully specified by the standard and the
/// uniform conversion is done here (not by <random> distributions) so that streams are
/// bit-identical across standard library implementations.
class Rng
{
  public:
    explicit Rng(std::uint64_t seed) : m_engine(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  private:
    std::mt19937_64 m_engine;
};

} // namespace meshlink

#endif // MESHLINK_RNG_HPP
