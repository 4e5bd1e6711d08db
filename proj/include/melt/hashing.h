#ifndef MELT_HASHING_H_
#define MELT_HASHING_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace melt {

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view bytes);
std::string Sha256File(const std::filesystem::path &path);

// SplitMix64 finalizer; used to derive independent RNG seeds.
uint64_t MixSeed(uint64_t x);
uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b = 0);

}  // namespace melt

#endif  // MELT_HASHING_H_
