#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hot {

// Set partition of {0..r-1} as a restricted growth string.
struct Partition {
  std::vector<int> rgs;

  Partition() = default;
  explicit Partition(std::vector<int> s);

  int size() const { return static_cast<int>(rgs.size()); }
  int blocks() const;
  bool operator==(const Partition&) const = default;
  auto operator<=>(const Partition&) const = default;

  // "{{1,2},{3}}" with 1-based positions.
  std::string to_string() const;
  static bool valid_rgs(std::span<const int> s);
};

enum class Side { Input, Output };

// Restriction of a class to one side of [k+l].
struct Restriction {
  Partition part;
  int u = 0;
  std::vector<int> pos_map;  // side position -> block of `part`
};

struct EquivalenceClass {
  Partition part;  // over [k+l], inputs first
  int k = 0;
  int l = 0;
  Partition mu_k;
  Partition mu_q;
  int u_k = 0;
  int u_q = 0;

  EquivalenceClass() = default;
  EquivalenceClass(Partition p, int k, int l);

  bool operator==(const EquivalenceClass& o) const { return k == o.k && l == o.l && part == o.part; }
  std::string to_string() const { return part.to_string(); }

  // Blocks holding both an input and an output position.
  std::vector<int> shared_blocks() const;
  // Every block with an input position also has an output position.
  bool is_lightweight() const;
};

std::uint64_t bell(int arity);
std::vector<Partition> enumerate_classes(int arity);
std::vector<EquivalenceClass> all_classes(int k, int l);

Partition pattern_of(std::span<const int> index);
// Allocation-free variant; writes rgs into out[0..len) and returns blocks.
int pattern_into(const int* index, int len, int* out);
// Base-8 packing of the rgs of index; len <= 8.
std::uint32_t pattern_code(const int* index, int len);
std::uint32_t pattern_code(const Partition& p);

bool in_class(std::span<const int> i, std::span<const int> j, const EquivalenceClass& mu);
Restriction restrict(const EquivalenceClass& mu, Side side);

std::vector<EquivalenceClass> lightweight_subset(int k, int l);
std::vector<int> fix_index(const EquivalenceClass& mu, std::span<const int> j);
std::vector<EquivalenceClass> uniform_1_to_k_subset(int k);

// Compact index: value at the first position of each restricted block.
std::vector<int> compact_index(const Restriction& r, std::span<const int> idx);

}  // namespace hot
