#include "xhaul/content.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace xhaul {

int PopularityState::popular_count() const {
  int n = 0;
  for (int l : life_remaining) n += (l > 0);
  return n;
}

std::vector<int> PopularityState::popular_files() const {
  std::vector<int> out;
  for (int f = 0; f < library_size(); ++f)
    if (life_remaining[f] > 0) out.push_back(f);
  return out;
}

std::vector<double> zipf_probs(int library_size, double exponent) {
  if (library_size < 1) throw std::domain_error("zipf_probs: library_size must be >= 1");
  if (exponent < 0.0) throw std::domain_error("zipf_probs: exponent must be >= 0");
  std::vector<double> p(library_size);
  double norm = 0.0;
  for (int l = 0; l < library_size; ++l) {
    p[l] = std::pow(static_cast<double>(l + 1), -exponent);
    norm += p[l];
  }
  for (double& v : p) v /= norm;
  return p;
}

PopularityState make_popularity(int library_size, double zipf_exponent, int lifetime) {
  if (lifetime < 1) throw std::domain_error("make_popularity: lifetime must be >= 1");
  PopularityState s;
  s.onset_prob = zipf_probs(library_size, zipf_exponent);
  s.life_remaining.assign(library_size, 0);
  s.lifetime.assign(library_size, lifetime);
  s.slot = 0;
  return s;
}

void step_popularity(PopularityState& state, std::mt19937_64& rng) {
  const int f_count = state.library_size();
  // Eligibility is fixed before the decrement: a file expiring this slot
  // stays unpopular until at least the next slot.
  std::vector<char> eligible(f_count);
  for (int f = 0; f < f_count; ++f) eligible[f] = (state.life_remaining[f] == 0);

  for (int f = 0; f < f_count; ++f)
    if (state.life_remaining[f] > 0) --state.life_remaining[f];

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int f = 0; f < f_count; ++f) {
    if (!eligible[f]) continue;
    if (unif(rng) < state.onset_prob[f]) state.life_remaining[f] = state.lifetime[f];
  }
  ++state.slot;
}

void ensure_min_popular(PopularityState& state, int min_popular) {
  if (min_popular > state.library_size())
    throw std::invalid_argument("ensure_min_popular: min_popular exceeds library size");
  int have = state.popular_count();
  if (have >= min_popular) return;

  // Unpopular files by descending onset probability, ties by ascending id.
  std::vector<int> candidates;
  for (int f = 0; f < state.library_size(); ++f)
    if (state.life_remaining[f] == 0) candidates.push_back(f);
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return state.onset_prob[a] > state.onset_prob[b];
  });

  for (int f : candidates) {
    if (have >= min_popular) break;
    state.life_remaining[f] = state.lifetime[f];
    ++have;
  }
}

RequestSet draw_requests(const PopularityState& state, int num_users,
                         std::mt19937_64& rng) {
  std::vector<int> pool = state.popular_files();
  if (static_cast<int>(pool.size()) < num_users)
    throw std::logic_error("draw_requests: fewer popular files than users");

  // Partial Fisher-Yates: sampling without replacement, assignment in
  // sampling order.
  RequestSet req;
  req.file_of_user.resize(num_users);
  for (int k = 0; k < num_users; ++k) {
    std::uniform_int_distribution<int> pick(k, static_cast<int>(pool.size()) - 1);
    std::swap(pool[k], pool[pick(rng)]);
    req.file_of_user[k] = pool[k];
  }
  return req;
}

CacheState::CacheState(int capacity) : capacity_(capacity) {
  if (capacity < 0) throw std::invalid_argument("CacheState: negative capacity");
  entries_.reserve(capacity);
}

bool CacheState::contains(int file) const { return last_request_.count(file) > 0; }

long CacheState::last_request_slot(int file) const {
  auto it = last_request_.find(file);
  if (it == last_request_.end())
    throw std::logic_error("CacheState: last_request_slot of uncached file");
  return it->second;
}

void CacheState::touch(int file, long slot) {
  auto pos = std::find(entries_.begin(), entries_.end(), file);
  if (pos == entries_.end()) throw std::logic_error("CacheState: touch of uncached file");
  entries_.erase(pos);
  entries_.push_back(file);
  last_request_[file] = slot;
}

void CacheState::insert(int file, long slot) {
  if (contains(file)) throw std::logic_error("CacheState: duplicate insert");
  if (capacity_ == 0) return;
  if (static_cast<int>(entries_.size()) >= capacity_) {
    last_request_.erase(entries_.front());
    entries_.erase(entries_.begin());
  }
  entries_.push_back(file);
  last_request_[file] = slot;
}

std::uint64_t CacheState::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (int f : entries_) {
    mix(static_cast<std::uint64_t>(f) + 1);
    mix(static_cast<std::uint64_t>(last_request_.at(f)) + 0x9e37ULL);
  }
  return h;
}

RequestSplit split_requests(const RequestSet& requests, const CacheState& cache) {
  RequestSplit split;
  for (int k = 0; k < requests.num_users(); ++k) {
    if (cache.contains(requests.file_of_user[k]))
      split.cached_users.push_back(k);
    else
      split.uncached_users.push_back(k);
  }
  return split;
}

void touch_requests(CacheState& cache, const RequestSet& requests, long slot) {
  for (int file : requests.file_of_user)
    if (cache.contains(file)) cache.touch(file, slot);
}

void cache_insert_lru(CacheState& cache, const std::vector<int>& new_files, long slot) {
  for (int file : new_files) cache.insert(file, slot);
}

int cache_age(const CacheState& cache, long slot, int age_cap, bool literal_formula) {
  if (cache.empty()) return age_cap;
  long extreme = literal_formula ? std::numeric_limits<long>::min()
                                 : std::numeric_limits<long>::max();
  for (int f : cache.entries()) {
    const long tau = cache.last_request_slot(f);
    extreme = literal_formula ? std::max(extreme, tau) : std::min(extreme, tau);
  }
  const long age = slot - extreme;
  return static_cast<int>(std::clamp<long>(age, 0, age_cap));
}

CacheState random_initial_cache(int library_size, int capacity, std::mt19937_64& rng) {
  if (capacity > library_size)
    throw std::invalid_argument("random_initial_cache: capacity exceeds library");
  std::vector<int> ids(library_size);
  std::iota(ids.begin(), ids.end(), 0);
  CacheState cache(capacity);
  for (int i = 0; i < capacity; ++i) {
    std::uniform_int_distribution<int> pick(i, library_size - 1);
    std::swap(ids[i], ids[pick(rng)]);
    cache.insert(ids[i], 0);
  }
  return cache;
}

}  // namespace xhaul
