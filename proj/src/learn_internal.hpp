#pragma once

#include <chrono>
#include <vector>

#include "blocks/eval.hpp"
#include "blocks/learn.hpp"

namespace blocks::detail {

void check_dataset(const Dataset& data);
const std::vector<TaskExample>& monitor_set(const Dataset& data);
std::vector<size_t> shuffled(size_t n, std::uint64_t seed, const char* tag, std::uint64_t epoch);

// Greedy evaluation on the monitor set, recorded as the epoch's metrics row;
// also tracks the best epoch and fires the hook.
void finish_epoch(TrainState& st, const Agent& agent, const Dataset& data, const LearnConfig& cfg,
                  int epoch, std::chrono::steady_clock::time_point started, const TrainHooks& hooks);

TrainResult result_of(const TrainState& st, const LearnConfig& cfg);

// Reduces per-item gradients in index order so the sum does not depend on
// how items were spread over threads.
void reduce_in_order(ParamSet& total, const std::vector<ParamSet>& parts);

}  // namespace blocks::detail
