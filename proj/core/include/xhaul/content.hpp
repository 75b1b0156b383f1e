#pragma once

#include <cstdint>
#include <random>
#include <unordered_map>
#include <vector>

#include "xhaul/config.hpp"

namespace xhaul {

/// Markov popularity process with temporal locality: an unpopular file
/// turns popular with its onset probability and then stays popular for
/// `lifetime` slots. Onset probabilities follow a Zipf law over file index.
struct PopularityState {
  std::vector<double> onset_prob;   // non-increasing in file index
  std::vector<int> life_remaining;  // > 0 means popular
  std::vector<int> lifetime;        // per-file popularity duration
  long slot = 0;

  int library_size() const { return static_cast<int>(onset_prob.size()); }
  bool is_popular(int file) const { return life_remaining[file] > 0; }
  int popular_count() const;
  std::vector<int> popular_files() const;
};

/// Zipf onset probabilities for `library_size` files, normalized to 1.
std::vector<double> zipf_probs(int library_size, double exponent);

PopularityState make_popularity(int library_size, double zipf_exponent,
                                int lifetime);

/// One slot of the popularity chain: files that were unpopular at the
/// start of the slot draw an onset; popular files lose one slot of life.
/// A file expiring this slot cannot re-onset until the next slot.
void step_popularity(PopularityState& state, std::mt19937_64& rng);

/// Promotes unpopular files (largest onset probability first, ties by
/// ascending file index) until at least `min_popular` files are popular.
void ensure_min_popular(PopularityState& state, int min_popular);

/// One request per user; file_of_user[k] is the file requested by user k.
struct RequestSet {
  std::vector<int> file_of_user;
  int num_users() const { return static_cast<int>(file_of_user.size()); }
};

/// K distinct files sampled uniformly without replacement from the popular
/// set. Requires at least K popular files (call ensure_min_popular first).
RequestSet draw_requests(const PopularityState& state, int num_users,
                         std::mt19937_64& rng);

/// Shared LRU cache of file ids plus the last slot each cached file was
/// requested. Identical across eRRHs by construction.
class CacheState {
 public:
  CacheState() = default;
  explicit CacheState(int capacity);

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  bool contains(int file) const;
  /// Entries in recency order, least recently used first.
  const std::vector<int>& entries() const { return entries_; }
  /// Last request slot of a cached file. Precondition: contains(file).
  long last_request_slot(int file) const;

  /// Move `file` to the most-recent position and stamp its request slot.
  void touch(int file, long slot);
  /// Insert an uncached file, evicting the least recently used entry when
  /// full. Precondition: !contains(file).
  void insert(int file, long slot);

  std::uint64_t fingerprint() const;

 private:
  int capacity_ = 0;
  std::vector<int> entries_;                    // LRU ... MRU
  std::unordered_map<int, long> last_request_;  // file -> slot
};

struct RequestSplit {
  std::vector<int> cached_users;    // users whose requested file is cached
  std::vector<int> uncached_users;  // users whose requested file is not
};

RequestSplit split_requests(const RequestSet& requests, const CacheState& cache);

/// Stamp the request slot of every requested file that is cached. Applied
/// in both delivery modes: the timestamps track requests, not actions.
void touch_requests(CacheState& cache, const RequestSet& requests, long slot);

/// Insert `new_files` one by one (callers pass them in ascending
/// requesting-user order). Precondition: none of them is cached.
void cache_insert_lru(CacheState& cache, const std::vector<int>& new_files,
                      long slot);

/// Cache age theta: staleness of the cache contents at `slot`, clamped to
/// [0, age_cap]. Default reading is the maximum time elapsed since the
/// last request over cached files; `literal_formula` switches to the
/// minimum-elapsed variant. An empty cache counts as fully stale.
int cache_age(const CacheState& cache, long slot, int age_cap,
              bool literal_formula = false);

/// Uniform random capacity-sized subset of the library, all stamps at 0.
CacheState random_initial_cache(int library_size, int capacity,
                                std::mt19937_64& rng);

}  // namespace xhaul
