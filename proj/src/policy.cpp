#include "blocks/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace blocks {

namespace k = kernels;

// ---------------------------------------------------------------------------
// Dimensions and parameters

std::vector<kernels::ConvShape> PolicyDims::conv_shapes() const {
  std::vector<kernels::ConvShape> shapes;
  int c = stacked_channels(), h = board_height, w = board_width;
  for (const auto& layer : conv) {
    kernels::ConvShape s{c, h, w, layer.filters, layer.kernel, layer.stride, layer.pad};
    if (s.out_height() < 1 || s.out_width() < 1)
      throw ShapeError("convolution stack collapses the board to nothing");
    shapes.push_back(s);
    c = s.filters;
    h = s.out_height();
    w = s.out_width();
  }
  return shapes;
}

int PolicyDims::conv_flat_size() const {
  if (conv.empty()) return stacked_channels() * board_height * board_width;
  const auto s = conv_shapes().back();
  return static_cast<int>(s.output_size());
}

void PolicyDims::validate() const {
  if (vocab_size < 2 || embed_dim < 1 || lstm_hidden < 1 || num_blocks < 1 ||
      board_height < 1 || board_width < 1 || history < 0 || visual_dim < 1 ||
      block_embed < 1 || dir_embed < 1 || hidden < 1)
    throw ShapeError("policy dimensions must be positive");
  for (const auto& l : conv)
    if (l.filters < 1 || l.kernel < 1 || l.stride < 1 || l.pad < 0)
      throw ShapeError("bad convolution layer spec");
  conv_shapes();
}

PolicyParams PolicyParams::create(const PolicyDims& d) {
  d.validate();
  PolicyParams p;
  p.dims = d;
  auto& t = p.tensors;
  const int H = d.lstm_hidden;
  t.add("word_emb", {d.vocab_size, d.embed_dim});
  t.add("lstm_wx", {4 * H, d.embed_dim});
  t.add("lstm_wh", {4 * H, H});
  t.add("lstm_b", {4 * H});
  const auto shapes = d.conv_shapes();
  for (size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    t.add("conv" + std::to_string(i) + "_w", {s.filters, s.channels, s.kernel, s.kernel});
    t.add("conv" + std::to_string(i) + "_b", {s.filters});
  }
  t.add("vis_w", {d.visual_dim, d.conv_flat_size()});
  t.add("vis_b", {d.visual_dim});
  t.add("act_block_emb", {d.num_blocks + 1, d.block_embed});
  t.add("act_dir_emb", {kNumDirOutputs + 1, d.dir_embed});
  t.add("hid_w", {d.hidden, d.context_dim()});
  t.add("hid_b", {d.hidden});
  switch (d.head) {
    case HeadKind::Factored:
      t.add("dir_w", {kNumDirOutputs, d.hidden});
      t.add("dir_b", {kNumDirOutputs});
      t.add("block_w", {d.num_blocks, d.hidden});
      t.add("block_b", {d.num_blocks});
      break;
    case HeadKind::QValues:
      t.add("q_w", {d.num_actions(), d.hidden});
      t.add("q_b", {d.num_actions()});
      break;
    case HeadKind::Planner:
      t.add("coord_w", {2, d.hidden});
      t.add("coord_b", {2});
      t.add("block_w", {d.num_blocks, d.hidden});
      t.add("block_b", {d.num_blocks});
      break;
  }
  return p;
}

namespace {

double truncated_normal(Rng& rng, double stddev) {
  std::normal_distribution<double> n(0.0, 1.0);
  double z;
  do {
    z = n(rng);
  } while (std::abs(z) > 2.0);
  return z * stddev;
}

void init_tensor(const std::string& name, Tensor& t, Rng& rng, InitScheme scheme) {
  const bool is_bias = name.ends_with("_b");
  if (is_bias) {
    std::fill(t.data.begin(), t.data.end(), 0.0);
    return;
  }
  std::normal_distribution<double> unit(0.0, 1.0);
  if (name == "word_emb") {
    for (double& v : t.data) v = unit(rng);
    return;
  }
  if (name.starts_with("act_")) {
    const double sd = scheme == InitScheme::TruncatedNormal ? 0.001 : 0.1;
    for (double& v : t.data) v = sd * unit(rng);
    return;
  }
  if (scheme == InitScheme::Glorot) {
    const int fan_out = t.shape[0];
    const int fan_in = static_cast<int>(t.size() / fan_out);
    const int recept = t.shape.size() == 4 ? t.shape[2] * t.shape[3] : 1;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out * recept));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : t.data) v = u(rng);
    return;
  }
  if (name.starts_with("conv")) {
    for (double& v : t.data) v = truncated_normal(rng, std::sqrt(0.005));
  } else if (name == "vis_w") {
    for (double& v : t.data) v = truncated_normal(rng, std::sqrt(0.004));
  } else {
    for (double& v : t.data) v = 0.01 * unit(rng);
  }
}

}  // namespace

void PolicyParams::initialize(Rng& rng, InitScheme scheme) {
  for (size_t i = 0; i < tensors.count(); ++i)
    init_tensor(tensors.name(i), tensors.at(i), rng, scheme);
  touch();
}

void PolicyParams::reinitialize(const std::string& name, Rng& rng, InitScheme scheme) {
  init_tensor(name, tensors[name], rng, scheme);
  touch();
}

// ---------------------------------------------------------------------------
// Contexts

ContextBuilder::ContextBuilder(const Instruction& instruction, const BoardGeometry& g,
                               int history)
    : geometry_(&g), history_(history) {
  ctx_.instruction = &instruction;
}

void ContextBuilder::reset(const WorldState& start) {
  ctx_.observations.assign(
      history_, Observation::zeros(geometry_->num_blocks(), geometry_->height, geometry_->width));
  ctx_.observations.push_back(render(start, *geometry_));
  ctx_.prev_action = Action::none();
}

void ContextBuilder::advance(const Action& taken, const WorldState& next) {
  if (!ctx_.observations.empty()) ctx_.observations.erase(ctx_.observations.begin());
  ctx_.observations.push_back(render(next, *geometry_));
  ctx_.prev_action = taken;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::pair<int, int> action_rows(const Action& a, int num_blocks) {
  switch (a.kind) {
    case Action::Kind::Move: return {a.block, static_cast<int>(a.dir)};
    case Action::Kind::Stop: return {num_blocks, kDirStop};
    case Action::Kind::None: break;
  }
  return {num_blocks, kDirNone};
}

const char* head_a_name(HeadKind h) {
  switch (h) {
    case HeadKind::Factored: return "dir";
    case HeadKind::QValues: return "q";
    case HeadKind::Planner: return "coord";
  }
  return "dir";
}

}  // namespace

std::shared_ptr<const InstructionTrace> encode_instruction(const PolicyParams& p,
                                                           const Instruction& ins) {
  const auto& d = p.dims;
  if (ins.tokens.empty()) throw ShapeError("empty instruction");
  auto t = std::make_shared<InstructionTrace>();
  const int n = static_cast<int>(ins.tokens.size());
  const int H = d.lstm_hidden, E = d.embed_dim;
  t->tokens = ins.tokens;
  t->n = n;
  t->hidden = H;
  t->embed = E;
  t->x.resize(static_cast<size_t>(n) * E);
  t->gates.resize(static_cast<size_t>(n) * 4 * H);
  t->cell.resize(static_cast<size_t>(n) * H);
  t->tanh_cell.resize(static_cast<size_t>(n) * H);
  t->h.resize(static_cast<size_t>(n) * H);
  t->mean.assign(H, 0.0);

  const Tensor& emb = p.tensors["word_emb"];
  const Tensor& wx = p.tensors["lstm_wx"];
  const Tensor& wh = p.tensors["lstm_wh"];
  const Tensor& b = p.tensors["lstm_b"];
  std::vector<double> z(4 * H), zh(4 * H), zero(4 * H, 0.0);
  for (int step = 0; step < n; ++step) {
    const int tok = ins.tokens[step];
    if (tok < 0 || tok >= d.vocab_size) throw ShapeError("token id out of range");
    double* x = t->x.data() + static_cast<size_t>(step) * E;
    std::copy_n(emb.ptr() + static_cast<size_t>(tok) * E, E, x);
    k::dense_forward(wx.data, b.data, {x, static_cast<size_t>(E)}, z, 4 * H, E);
    if (step > 0) {
      k::dense_forward(wh.data, zero,
                       {t->h.data() + static_cast<size_t>(step - 1) * H, static_cast<size_t>(H)},
                       zh, 4 * H, H);
      for (int i = 0; i < 4 * H; ++i) z[i] += zh[i];
    }
    double* g = t->gates.data() + static_cast<size_t>(step) * 4 * H;
    double* c = t->cell.data() + static_cast<size_t>(step) * H;
    double* tc = t->tanh_cell.data() + static_cast<size_t>(step) * H;
    double* h = t->h.data() + static_cast<size_t>(step) * H;
    const double* c_prev = step > 0 ? c - H : nullptr;
    for (int i = 0; i < H; ++i) {
      const double ig = sigmoid(z[i]);
      const double fg = sigmoid(z[H + i]);
      const double gg = std::tanh(z[2 * H + i]);
      const double og = sigmoid(z[3 * H + i]);
      g[i] = ig;
      g[H + i] = fg;
      g[2 * H + i] = gg;
      g[3 * H + i] = og;
      c[i] = (c_prev ? fg * c_prev[i] : 0.0) + ig * gg;
      tc[i] = std::tanh(c[i]);
      h[i] = og * tc[i];
      t->mean[i] += h[i];
    }
  }
  for (double& m : t->mean) m /= n;
  return t;
}

VisualTrace encode_visual(const PolicyParams& p, const std::vector<Observation>& obs) {
  const auto& d = p.dims;
  if (static_cast<int>(obs.size()) != d.history + 1)
    throw ShapeError("expected " + std::to_string(d.history + 1) + " observations");
  VisualTrace t;
  const size_t plane = static_cast<size_t>(d.board_height) * d.board_width;
  t.input.reserve(plane * d.stacked_channels());
  for (const auto& o : obs) {
    if (o.channels != d.num_blocks || o.height != d.board_height || o.width != d.board_width)
      throw ShapeError("observation shape does not match the policy");
    t.input.insert(t.input.end(), o.data.begin(), o.data.end());
  }
  const auto shapes = d.conv_shapes();
  const std::vector<double>* in = &t.input;
  for (size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    std::vector<double> out(s.output_size());
    k::conv2d_forward(s, *in, p.tensors["conv" + std::to_string(i) + "_w"].data,
                      p.tensors["conv" + std::to_string(i) + "_b"].data, out);
    for (double& v : out) v = std::max(v, 0.0);
    t.conv_out.push_back(std::move(out));
    in = &t.conv_out.back();
  }
  t.v.resize(d.visual_dim);
  k::dense_forward(p.tensors["vis_w"].data, p.tensors["vis_b"].data, *in, t.v, d.visual_dim,
                   static_cast<int>(in->size()));
  return t;
}

ForwardTrace forward(const PolicyParams& p, const AgentContext& ctx,
                     std::shared_ptr<const InstructionTrace> ins) {
  const auto& d = p.dims;
  ForwardTrace t;
  t.generation = p.generation;
  if (!ins) {
    if (!ctx.instruction) throw ShapeError("context has no instruction");
    ins = encode_instruction(p, *ctx.instruction);
  }
  t.instruction = std::move(ins);
  t.visual = encode_visual(p, ctx.observations);
  t.prev_action = ctx.prev_action;

  t.context.reserve(d.context_dim());
  t.context.insert(t.context.end(), t.visual.v.begin(), t.visual.v.end());
  t.context.insert(t.context.end(), t.instruction->mean.begin(), t.instruction->mean.end());
  const auto [brow, drow] = action_rows(ctx.prev_action, d.num_blocks);
  const Tensor& be = p.tensors["act_block_emb"];
  const Tensor& de = p.tensors["act_dir_emb"];
  t.context.insert(t.context.end(), be.ptr() + static_cast<size_t>(brow) * d.block_embed,
                   be.ptr() + static_cast<size_t>(brow + 1) * d.block_embed);
  t.context.insert(t.context.end(), de.ptr() + static_cast<size_t>(drow) * d.dir_embed,
                   de.ptr() + static_cast<size_t>(drow + 1) * d.dir_embed);

  t.hidden.resize(d.hidden);
  k::dense_forward(p.tensors["hid_w"].data, p.tensors["hid_b"].data, t.context, t.hidden,
                   d.hidden, d.context_dim());
  for (double& v : t.hidden) v = std::max(v, 0.0);

  const std::string a = head_a_name(d.head);
  const Tensor& wa = p.tensors[a + "_w"];
  t.out_a.resize(wa.dim(0));
  k::dense_forward(wa.data, p.tensors[a + "_b"].data, t.hidden, t.out_a, wa.dim(0), d.hidden);
  if (d.head != HeadKind::QValues) {
    t.out_b.resize(d.num_blocks);
    k::dense_forward(p.tensors["block_w"].data, p.tensors["block_b"].data, t.hidden, t.out_b,
                     d.num_blocks, d.hidden);
  }
  return t;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= sum;
  return p;
}

ActionDistribution distribution_of(const ForwardTrace& t) {
  if (t.out_b.empty() || t.out_a.size() != kNumDirOutputs)
    throw ShapeError("trace does not come from a factored policy head");
  return {softmax(t.out_b), softmax(t.out_a)};
}

PolicyOutput action_distribution(const PolicyParams& p, const AgentContext& ctx,
                                 std::shared_ptr<const InstructionTrace> ins) {
  if (p.dims.head != HeadKind::Factored) throw ShapeError("not a factored policy");
  PolicyOutput out;
  out.trace = forward(p, ctx, std::move(ins));
  out.dist = distribution_of(out.trace);
  return out;
}

namespace {

int categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u above the final partial sum; take the last positive entry.
  for (size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<int>(i);
  return static_cast<int>(probs.size()) - 1;
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Action sample(const ActionDistribution& dist, Rng& rng) {
  const int dir = categorical(dist.dir_probs, rng);
  if (dir == kDirStop) return Action::stop();
  return Action::move(categorical(dist.block_probs, rng), static_cast<Direction>(dir));
}

Action greedy(const ActionDistribution& dist) {
  const int dir = argmax(dist.dir_probs);
  if (dir == kDirStop) return Action::stop();
  return Action::move(argmax(dist.block_probs), static_cast<Direction>(dir));
}

double action_probability(const ActionDistribution& dist, const Action& a) {
  switch (a.kind) {
    case Action::Kind::Stop: return dist.dir_probs[kDirStop];
    case Action::Kind::Move:
      return dist.dir_probs[static_cast<int>(a.dir)] * dist.block_probs.at(a.block);
    case Action::Kind::None: break;
  }
  throw Error("NONE has no probability");
}

namespace {
double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}
}  // namespace

std::pair<double, double> log_prob_and_entropy(const ActionDistribution& dist,
                                               const Action& action) {
  if (action.is_none()) throw Error("NONE is not a selectable action");
  double lp = std::log(dist.dir_probs[action.is_stop() ? kDirStop : static_cast<int>(action.dir)]);
  if (action.is_move()) lp += std::log(dist.block_probs.at(action.block));
  return {lp, entropy(dist.block_probs) + entropy(dist.dir_probs)};
}

// ---------------------------------------------------------------------------
// Backward

void backward_instruction(const PolicyParams& p, const InstructionTrace& t,
                          const std::vector<double>& d_mean, ParamSet& grads) {
  const int n = t.n, H = t.hidden, E = t.embed;
  const Tensor& wx = p.tensors["lstm_wx"];
  const Tensor& wh = p.tensors["lstm_wh"];
  Tensor& gwx = grads["lstm_wx"];
  Tensor& gwh = grads["lstm_wh"];
  Tensor& gb = grads["lstm_b"];
  Tensor& gemb = grads["word_emb"];

  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H), dx(E), dh_prev(H),
      scratch_b(4 * H);
  for (int step = n - 1; step >= 0; --step) {
    const double* g = t.gates.data() + static_cast<size_t>(step) * 4 * H;
    const double* tc = t.tanh_cell.data() + static_cast<size_t>(step) * H;
    const double* c_prev = step > 0 ? t.cell.data() + static_cast<size_t>(step - 1) * H : nullptr;
    for (int i = 0; i < H; ++i) {
      const double ig = g[i], fg = g[H + i], gg = g[2 * H + i], og = g[3 * H + i];
      const double dh = d_mean[i] / n + dh_next[i];
      const double dc = dh * og * (1.0 - tc[i] * tc[i]) + dc_next[i];
      dz[i] = dc * gg * ig * (1.0 - ig);
      dz[H + i] = (c_prev ? dc * c_prev[i] : 0.0) * fg * (1.0 - fg);
      dz[2 * H + i] = dc * ig * (1.0 - gg * gg);
      dz[3 * H + i] = dh * tc[i] * og * (1.0 - og);
      dc_next[i] = dc * fg;
    }
    std::fill(dx.begin(), dx.end(), 0.0);
    k::dense_backward(wx.data, {t.x.data() + static_cast<size_t>(step) * E, static_cast<size_t>(E)},
                      dz, gwx.data, gb.data, dx, 4 * H, E);
    double* ge = gemb.ptr() + static_cast<size_t>(t.tokens[step]) * E;
    for (int i = 0; i < E; ++i) ge[i] += dx[i];
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    if (step > 0) {
      std::fill(scratch_b.begin(), scratch_b.end(), 0.0);
      k::dense_backward(wh.data,
                        {t.h.data() + static_cast<size_t>(step - 1) * H, static_cast<size_t>(H)},
                        dz, gwh.data, scratch_b, dh_prev, 4 * H, H);
    }
    dh_next = dh_prev;
  }
}

void backward_outputs(const PolicyParams& p, const ForwardTrace& t,
                      const std::vector<double>& d_out_a,
                      const std::vector<double>& d_out_b, ParamSet& grads,
                      std::vector<double>* instruction_grad) {
  if (t.generation != p.generation)
    throw StaleTrace("trace was computed from different parameter values");
  if (!grads.same_layout(p.tensors)) throw ShapeError("gradient buffer layout mismatch");
  const auto& d = p.dims;
  if (d_out_a.size() != t.out_a.size() || (!d_out_b.empty() && d_out_b.size() != t.out_b.size()))
    throw ShapeError("output gradient shape mismatch");

  std::vector<double> dhidden(d.hidden, 0.0);
  const std::string a = head_a_name(d.head);
  k::dense_backward(p.tensors[a + "_w"].data, t.hidden, d_out_a, grads[a + "_w"].data,
                    grads[a + "_b"].data, dhidden, static_cast<int>(t.out_a.size()), d.hidden);
  if (!d_out_b.empty())
    k::dense_backward(p.tensors["block_w"].data, t.hidden, d_out_b, grads["block_w"].data,
                      grads["block_b"].data, dhidden, d.num_blocks, d.hidden);
  for (int i = 0; i < d.hidden; ++i)
    if (t.hidden[i] <= 0.0) dhidden[i] = 0.0;

  std::vector<double> dctx(d.context_dim(), 0.0);
  k::dense_backward(p.tensors["hid_w"].data, t.context, dhidden, grads["hid_w"].data,
                    grads["hid_b"].data, dctx, d.hidden, d.context_dim());

  const int off_mean = d.visual_dim;
  const int off_block = off_mean + d.lstm_hidden;
  const int off_dir = off_block + d.block_embed;
  const auto [brow, drow] = action_rows(t.prev_action, d.num_blocks);
  double* gbe = grads["act_block_emb"].ptr() + static_cast<size_t>(brow) * d.block_embed;
  for (int i = 0; i < d.block_embed; ++i) gbe[i] += dctx[off_block + i];
  double* gde = grads["act_dir_emb"].ptr() + static_cast<size_t>(drow) * d.dir_embed;
  for (int i = 0; i < d.dir_embed; ++i) gde[i] += dctx[off_dir + i];

  // Visual encoder.
  const auto shapes = d.conv_shapes();
  const std::vector<double>& flat = shapes.empty() ? t.visual.input : t.visual.conv_out.back();
  std::vector<double> dflat(flat.size(), 0.0);
  std::vector<double> dv(dctx.begin(), dctx.begin() + d.visual_dim);
  k::dense_backward(p.tensors["vis_w"].data, flat, dv, grads["vis_w"].data, grads["vis_b"].data,
                    shapes.empty() ? std::span<double>{} : std::span<double>(dflat),
                    d.visual_dim, static_cast<int>(flat.size()));
  std::vector<double> dout = std::move(dflat);
  for (int i = static_cast<int>(shapes.size()) - 1; i >= 0; --i) {
    const auto& out = t.visual.conv_out[i];
    for (size_t e = 0; e < dout.size(); ++e)
      if (out[e] <= 0.0) dout[e] = 0.0;
    const std::vector<double>& in = i == 0 ? t.visual.input : t.visual.conv_out[i - 1];
    std::vector<double> din(i == 0 ? 0 : in.size(), 0.0);
    const std::string name = "conv" + std::to_string(i);
    k::conv2d_backward(shapes[i], in, p.tensors[name + "_w"].data, dout, grads[name + "_w"].data,
                       grads[name + "_b"].data, din);
    dout = std::move(din);
  }

  std::vector<double> dmean(dctx.begin() + off_mean, dctx.begin() + off_block);
  if (instruction_grad) {
    if (instruction_grad->size() != dmean.size()) instruction_grad->assign(dmean.size(), 0.0);
    for (size_t i = 0; i < dmean.size(); ++i) (*instruction_grad)[i] += dmean[i];
  } else {
    backward_instruction(p, *t.instruction, dmean, grads);
  }
}

void accumulate_policy_gradient(const PolicyParams& p, const ForwardTrace& t,
                                const Action& action, double w_logprob, double w_entropy,
                                ParamSet& grads, std::vector<double>* instruction_grad) {
  if (p.dims.head != HeadKind::Factored) throw ShapeError("not a factored policy");
  if (action.is_none()) throw Error("NONE is not a selectable action");
  const ActionDistribution dist = distribution_of(t);
  auto head_grad = [&](const std::vector<double>& probs, int chosen, bool use_lp) {
    double h = 0.0;
    for (double v : probs)
      if (v > 0.0) h -= v * std::log(v);
    std::vector<double> g(probs.size(), 0.0);
    for (size_t i = 0; i < probs.size(); ++i) {
      if (use_lp) g[i] += w_logprob * ((static_cast<int>(i) == chosen ? 1.0 : 0.0) - probs[i]);
      if (w_entropy != 0.0 && probs[i] > 0.0)
        g[i] += w_entropy * (-probs[i] * (std::log(probs[i]) + h));
    }
    return g;
  };
  const int dir = action.is_stop() ? kDirStop : static_cast<int>(action.dir);
  const auto d_dir = head_grad(dist.dir_probs, dir, true);
  const auto d_block = head_grad(dist.block_probs, action.is_move() ? action.block : -1,
                                 action.is_move());
  backward_outputs(p, t, d_dir, d_block, grads, instruction_grad);
}

ParamSet backward(const PolicyParams& p, const ForwardTrace& t, const Action& action,
                  double w_logprob, double w_entropy) {
  ParamSet grads = p.tensors.zeros_like();
  accumulate_policy_gradient(p, t, action, w_logprob, w_entropy, grads);
  return grads;
}

}  // namespace blocks
