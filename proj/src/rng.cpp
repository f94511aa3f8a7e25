#include "protorep/rng.hpp"

namespace protorep {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell,
                          std::uint64_t index) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (cell * 0xd6e8feb86659fd93ULL));
  h = splitmix64(h ^ (index * 0xa5a35c3d23f38e1bULL));
  return h;
}

}  // namespace protorep
