#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "skylink/common.hpp"

namespace skylink {

struct Transition {
  Eigen::VectorXd obs;
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool terminal = false;
};

// Bounded FIFO of transitions; the oldest entry is overwritten once full.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("replay memory capacity must be positive");
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  // i = 0 is the oldest stored transition.
  const Transition& operator[](std::size_t i) const {
    return data_[(head_ + i) % data_.size()];
  }

  // `count` distinct slot positions, uniformly without replacement.
  template <typename Rng>
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    if (count > data_.size()) throw Error("replay memory: insufficient samples");
    std::vector<std::size_t> out;
    out.reserve(count);
    if (2 * count > data_.size()) {
      std::vector<std::size_t> all(data_.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      std::shuffle(all.begin(), all.end(), rng);
      all.resize(count);
      return all;
    }
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    while (out.size() < count) {
      const std::size_t i = pick(rng);
      if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

}  // namespace skylink
