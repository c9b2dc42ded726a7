#pragma once

// UCB1 prompt scheduling. Each prompt candidate is an arm; the arm with the
// largest upper confidence bound on its mean reward is pulled each round.
//
// Rewards arrive as raw discrepancy counts. They are clipped to `reward_cap`
// and scaled into [0, 1], and accumulated as integer units of 1/reward_cap so
// mean x pulls == cumulative holds exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "conndiff/util.hpp"

namespace conndiff {

struct PromptArm {
  std::string prompt_id;
  std::uint64_t pulls = 0;
  std::uint64_t reward_units = 0;  // sum of min(raw, cap) over pulls
  std::uint64_t reward_cap = 1;
  std::string fingerprint;         // content hash of the prompt this arm stands for

  double cumulative_reward() const { return static_cast<double>(reward_units) / static_cast<double>(reward_cap); }
  double mean_reward() const {
    return pulls == 0 ? 0.0
                      : static_cast<double>(reward_units) / (static_cast<double>(reward_cap) * static_cast<double>(pulls));
  }
  bool operator==(const PromptArm&) const = default;
};

struct BanditState {
  std::vector<PromptArm> arms;
  std::uint64_t total_rounds = 0;
  std::uint64_t reward_cap = 5;

  static BanditState fresh(const std::vector<std::string>& ids, std::uint64_t reward_cap = 5,
                           const std::vector<std::string>& fingerprints = {}) {
    if (reward_cap == 0) throw Error("reward_cap must be positive");
    BanditState s;
    s.reward_cap = reward_cap;
    for (std::size_t i = 0; i < ids.size(); ++i)
      s.arms.push_back({ids[i], 0, 0, reward_cap, i < fingerprints.size() ? fingerprints[i] : std::string{}});
    return s;
  }

  const PromptArm& arm(const std::string& id) const {
    for (const auto& a : arms)
      if (a.prompt_id == id) return a;
    throw Error("unknown prompt id: " + id);
  }

  bool operator==(const BanditState&) const = default;
};

/// mean + sqrt(2 ln R / pulls), natural log. R is real-valued here so the
/// formula can be evaluated off the integer grid; campaigns pass round counts.
inline double ucb_score(double mean, std::uint64_t pulls, double total_rounds) {
  if (pulls == 0) throw Error("ucb_score: arm has never been pulled");
  if (!(total_rounds >= 1.0)) throw Error("ucb_score: total_rounds must be at least 1");
  return mean + std::sqrt(2.0 * std::log(total_rounds) / static_cast<double>(pulls));
}

inline double ucb_score(const PromptArm& arm, std::uint64_t total_rounds) {
  return ucb_score(arm.mean_reward(), arm.pulls, static_cast<double>(total_rounds));
}

/// Index of the arm to pull next. Unpulled arms go first in index order;
/// otherwise the maximal score wins, ties to the lowest index.
inline std::size_t select_arm_index(const BanditState& state) {
  if (state.arms.empty()) throw Error("select_arm: no arms");
  for (std::size_t i = 0; i < state.arms.size(); ++i)
    if (state.arms[i].pulls == 0) return i;
  std::size_t best = 0;
  double best_score = ucb_score(state.arms[0], state.total_rounds);
  for (std::size_t i = 1; i < state.arms.size(); ++i) {
    const double s = ucb_score(state.arms[i], state.total_rounds);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

inline const std::string& select_arm(const BanditState& state) { return state.arms[select_arm_index(state)].prompt_id; }

inline BanditState update(BanditState state, const std::string& prompt_id, std::uint64_t raw_reward) {
  for (auto& a : state.arms) {
    if (a.prompt_id != prompt_id) continue;
    a.reward_cap = state.reward_cap;
    a.pulls += 1;
    a.reward_units += std::min(raw_reward, state.reward_cap);
    state.total_rounds += 1;
    return state;
  }
  throw Error("update: unknown prompt id: " + prompt_id);
}

}  // namespace conndiff
