#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "blocks/policy.hpp"
#include "json.hpp"

namespace blocks {

static_assert(std::endian::native == std::endian::little,
              "checkpoint tensors are stored as little-endian float64");

namespace {

constexpr char kMagic[8] = {'B', 'L', 'K', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

using ojson = nlohmann::ordered_json;

const char* head_name(HeadKind h) {
  switch (h) {
    case HeadKind::Factored: return "factored";
    case HeadKind::QValues: return "q";
    case HeadKind::Planner: return "planner";
  }
  return "factored";
}

HeadKind head_from_name(const std::string& s) {
  if (s == "factored") return HeadKind::Factored;
  if (s == "q") return HeadKind::QValues;
  if (s == "planner") return HeadKind::Planner;
  throw ShapeError("unknown head kind '" + s + "'");
}

ojson dims_json(const PolicyDims& d) {
  ojson j;
  j["vocab_size"] = d.vocab_size;
  j["embed_dim"] = d.embed_dim;
  j["lstm_hidden"] = d.lstm_hidden;
  j["num_blocks"] = d.num_blocks;
  j["board_height"] = d.board_height;
  j["board_width"] = d.board_width;
  j["history"] = d.history;
  ojson conv = ojson::array();
  for (const auto& l : d.conv)
    conv.push_back({{"filters", l.filters}, {"kernel", l.kernel}, {"stride", l.stride},
                    {"pad", l.pad}});
  j["conv"] = conv;
  j["visual_dim"] = d.visual_dim;
  j["block_embed"] = d.block_embed;
  j["dir_embed"] = d.dir_embed;
  j["hidden"] = d.hidden;
  j["head"] = head_name(d.head);
  return j;
}

PolicyDims dims_parse(const ojson& j) {
  PolicyDims d;
  d.vocab_size = j.at("vocab_size").get<int>();
  d.embed_dim = j.at("embed_dim").get<int>();
  d.lstm_hidden = j.at("lstm_hidden").get<int>();
  d.num_blocks = j.at("num_blocks").get<int>();
  d.board_height = j.at("board_height").get<int>();
  d.board_width = j.at("board_width").get<int>();
  d.history = j.at("history").get<int>();
  d.conv.clear();
  for (const auto& l : j.at("conv"))
    d.conv.push_back({l.at("filters").get<int>(), l.at("kernel").get<int>(),
                      l.at("stride").get<int>(), l.at("pad").get<int>()});
  d.visual_dim = j.at("visual_dim").get<int>();
  d.block_embed = j.at("block_embed").get<int>();
  d.dir_embed = j.at("dir_embed").get<int>();
  d.hidden = j.at("hidden").get<int>();
  d.head = head_from_name(j.at("head").get<std::string>());
  return d;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw ShapeError("checkpoint is truncated");
  }
  const std::string& bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string dims_to_json(const PolicyDims& d) { return dims_json(d).dump(); }

PolicyDims dims_from_json(const std::string& text) {
  try {
    return dims_parse(ojson::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("policy dims: ") + e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  ojson header;
  header["format_version"] = kFormatVersion;
  header["dims"] = dims_json(ck.params.dims);
  header["vocab"] = ck.vocab.known_tokens();
  header["generation"] = ck.params.generation;
  header["config"] = ck.header_json.empty() ? ojson::object() : ojson::parse(ck.header_json);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  const auto& t = ck.params.tensors;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.count()));
  for (size_t i = 0; i < t.count(); ++i) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name(i).size()));
    out += t.name(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.at(i).shape.size()));
    for (int dim : t.at(i).shape) put<std::int64_t>(out, dim);
    out.append(reinterpret_cast<const char*>(t.at(i).ptr()), t.at(i).size() * sizeof(double));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw ShapeError("not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion)
    throw ShapeError("unsupported checkpoint version " + std::to_string(version));
  const std::string text = r.str(r.get<std::uint64_t>());
  Checkpoint ck;
  ojson header;
  try {
    header = ojson::parse(text);
    ck.params = PolicyParams::create(dims_parse(header.at("dims")));
    ck.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    ck.params.generation = header.at("generation").get<std::uint64_t>();
    ck.header_json = header.at("config").dump();
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  auto& t = ck.params.tensors;
  if (count != t.count()) throw ShapeError("checkpoint tensor count does not match its dims");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.get<std::uint32_t>());
    const auto ndim = r.get<std::uint32_t>();
    std::vector<int> shape(ndim);
    for (auto& dim : shape) dim = static_cast<int>(r.get<std::int64_t>());
    if (name != t.name(i) || shape != t.at(i).shape)
      throw ShapeError("checkpoint tensor '" + name + "' does not match its dims");
    r.raw(t.at(i).ptr(), t.at(i).size() * sizeof(double));
  }
  if (!r.done()) throw ShapeError("trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << serialize_checkpoint(ck);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace blocks
