#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "blocks/env.hpp"
#include "blocks/kernels.hpp"
#include "blocks/lang.hpp"
#include "blocks/tensor.hpp"

namespace blocks {

class StaleTrace : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

struct ConvLayerSpec {
  int filters = 8;
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

// What sits on top of the shared encoders.
enum class HeadKind {
  Factored,  // direction softmax (N, S, E, W, STOP) and block softmax
  QValues,   // one value per selectable action
  Planner,   // block softmax and a (col, row) target regression
};

enum class InitScheme { TruncatedNormal, Glorot };

struct PolicyDims {
  int vocab_size = 2;
  int embed_dim = 16;
  int lstm_hidden = 32;
  int num_blocks = 3;
  int board_height = 5;
  int board_width = 5;
  int history = 4;  // K previous observations
  std::vector<ConvLayerSpec> conv = {ConvLayerSpec{}};
  int visual_dim = 32;
  int block_embed = 8;
  int dir_embed = 8;
  int hidden = 64;
  HeadKind head = HeadKind::Factored;

  int stacked_channels() const { return (history + 1) * num_blocks; }
  int context_dim() const { return visual_dim + lstm_hidden + block_embed + dir_embed; }
  int num_actions() const { return num_blocks * 4 + 1; }
  std::vector<kernels::ConvShape> conv_shapes() const;
  int conv_flat_size() const;
  void validate() const;

  friend bool operator==(const PolicyDims&, const PolicyDims&) = default;
};

inline constexpr int kDirStop = 4;      // index of STOP in the direction head
inline constexpr int kDirNone = 5;      // previous-action row for NONE
inline constexpr int kNumDirOutputs = 5;

// All learnable tensors. generation changes whenever the values change, so a
// forward trace can be matched against the parameters it was computed from.
struct PolicyParams {
  PolicyDims dims;
  ParamSet tensors;
  std::uint64_t generation = 0;

  static PolicyParams create(const PolicyDims& dims);  // all zeros
  void initialize(Rng& rng, InitScheme scheme);
  void reinitialize(const std::string& name, Rng& rng, InitScheme scheme);
  void touch() { ++generation; }
};

struct AgentContext {
  const Instruction* instruction = nullptr;
  std::vector<Observation> observations;  // K+1 slots, oldest first, current last
  Action prev_action = Action::none();
};

// Builds contexts along an episode: zero observations before the first step.
class ContextBuilder {
 public:
  ContextBuilder(const Instruction& instruction, const BoardGeometry& g, int history);
  void reset(const WorldState& start);
  void advance(const Action& taken, const WorldState& next);
  const AgentContext& context() const { return ctx_; }

 private:
  const BoardGeometry* geometry_;
  int history_;
  AgentContext ctx_;
};

struct ActionDistribution {
  std::vector<double> block_probs;
  std::vector<double> dir_probs;  // N, S, E, W, STOP
};

struct InstructionTrace {
  std::vector<int> tokens;
  int n = 0, hidden = 0, embed = 0;
  std::vector<double> x;      // (n, E) embeddings
  std::vector<double> gates;  // (n, 4H) activated i, f, g, o
  std::vector<double> cell;   // (n, H)
  std::vector<double> tanh_cell;
  std::vector<double> h;      // (n, H)
  std::vector<double> mean;   // (H)
};

struct VisualTrace {
  std::vector<double> input;                // stacked observations
  std::vector<std::vector<double>> conv_out;  // post-rectifier activations per layer
  std::vector<double> v;
};

struct ForwardTrace {
  std::shared_ptr<const InstructionTrace> instruction;
  VisualTrace visual;
  Action prev_action;
  std::vector<double> context;  // [v, mean, psi_a(prev)]
  std::vector<double> hidden;   // post-rectifier
  std::vector<double> out_a;    // direction logits | Q values | target coords
  std::vector<double> out_b;    // block logits (empty for Q heads)
  std::uint64_t generation = 0;
};

std::shared_ptr<const InstructionTrace> encode_instruction(const PolicyParams& p,
                                                           const Instruction& ins);
VisualTrace encode_visual(const PolicyParams& p, const std::vector<Observation>& obs);

// Shared encoders and rectified hidden layer, then the configured head.
// A precomputed instruction trace may be passed to skip the recurrence.
ForwardTrace forward(const PolicyParams& p, const AgentContext& ctx,
                     std::shared_ptr<const InstructionTrace> ins = nullptr);

std::vector<double> softmax(const std::vector<double>& logits);
ActionDistribution distribution_of(const ForwardTrace& t);

struct PolicyOutput {
  ActionDistribution dist;
  ForwardTrace trace;
};
PolicyOutput action_distribution(const PolicyParams& p, const AgentContext& ctx,
                                 std::shared_ptr<const InstructionTrace> ins = nullptr);

Action sample(const ActionDistribution& dist, Rng& rng);
Action greedy(const ActionDistribution& dist);
double action_probability(const ActionDistribution& dist, const Action& a);
// log P(action) under the factorization; entropy is the sum of head entropies.
std::pair<double, double> log_prob_and_entropy(const ActionDistribution& dist,
                                               const Action& action);

// Gradients of the head outputs flow back through the network into grads.
// When instruction_grad is non-null the gradient with respect to the pooled
// instruction vector is accumulated there instead of running the recurrence
// backward; call backward_instruction once per episode afterwards.
void backward_outputs(const PolicyParams& p, const ForwardTrace& t,
                      const std::vector<double>& d_out_a,
                      const std::vector<double>& d_out_b, ParamSet& grads,
                      std::vector<double>* instruction_grad = nullptr);
void backward_instruction(const PolicyParams& p, const InstructionTrace& t,
                          const std::vector<double>& d_mean, ParamSet& grads);

// Accumulates the gradient of w_logprob*log pi(a) + w_entropy*H into grads.
void accumulate_policy_gradient(const PolicyParams& p, const ForwardTrace& t,
                                const Action& action, double w_logprob,
                                double w_entropy, ParamSet& grads,
                                std::vector<double>* instruction_grad = nullptr);
ParamSet backward(const PolicyParams& p, const ForwardTrace& t, const Action& action,
                  double w_logprob, double w_entropy);

// Checkpoints: versioned binary container with a JSON header echoing the
// configuration, then named float64 tensors.
struct Checkpoint {
  std::string header_json;  // free-form configuration echo
  PolicyParams params;
  Vocabulary vocab;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);
std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::string& bytes);

std::string dims_to_json(const PolicyDims& d);
PolicyDims dims_from_json(const std::string& json_text);

}  // namespace blocks
