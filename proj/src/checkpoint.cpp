#include "deld/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "deld/error.hpp"

namespace deld {

namespace {

constexpr char kMagic[8] = {'D', 'E', 'L', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kHasEncoder = 1;
constexpr std::uint8_t kHasBank = 2;
constexpr std::uint8_t kHasClassifier = 4;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void values(const Tensor& t) {
    u64(t.numel());
    for (double v : t.data) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw ParseError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void values_into(Tensor& t, const std::string& name) {
    const std::uint64_t n = u64();
    if (n != t.numel()) {
      throw ParseError("checkpoint parameter " + name + " holds " + std::to_string(n) +
                       " values, expected " + std::to_string(t.numel()));
    }
    need(n * 8);
    for (double& v : t.data) v = f64();
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint32_t narrow(std::size_t v) {
  if (v > 0xffffffffu) throw ContractError("checkpoint field exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string serialize(const Checkpoint& ck) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  std::uint8_t flags = 0;
  if (ck.encoder) flags |= kHasEncoder;
  if (ck.bank) flags |= kHasBank;
  if (ck.classifier) flags |= kHasClassifier;
  w.u8(flags);

  if (ck.encoder) {
    const EncoderConfig& c = ck.encoder->config;
    for (std::size_t v : {c.d, c.layers, c.heads, c.ffn_dim, c.vocab_size, c.n_max, c.prompt_capacity}) {
      w.u32(narrow(v));
    }
    w.u64(c.seed);
    w.f64(c.layer_norm_eps);
    w.u8(ck.encoder->frozen ? 1 : 0);
    for (const Parameter* p : ck.encoder->parameters()) w.values(p->value);
  }
  if (ck.bank) {
    w.u8(ck.bank->position_mode() == PositionMode::kAppend ? 1 : 0);
    w.u32(narrow(ck.bank->size()));
    for (const SoftPrompt& p : ck.bank->prompts()) {
      w.u32(narrow(p.generator_id.size()));
      w.bytes(p.generator_id.data(), p.generator_id.size());
      w.u32(narrow(p.length()));
      w.u32(narrow(p.width()));
      w.u8(p.frozen ? 1 : 0);
      for (double v : p.matrix.value.data) w.f64(v);
    }
  }
  if (ck.classifier) {
    w.u32(narrow(ck.classifier->dim()));
    for (double v : ck.classifier->weight.value.data) w.f64(v);
    w.f64(ck.classifier->bias.value.data[0]);
  }
  return w.take();
}

Checkpoint deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.str(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw ParseError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint8_t flags = r.u8();
  Checkpoint ck;
  if (flags & kHasEncoder) {
    EncoderConfig c;
    c.d = r.u32();
    c.layers = r.u32();
    c.heads = r.u32();
    c.ffn_dim = r.u32();
    c.vocab_size = r.u32();
    c.n_max = r.u32();
    c.prompt_capacity = r.u32();
    c.seed = r.u64();
    c.layer_norm_eps = r.f64();
    const bool frozen = r.u8() != 0;
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ParseError(std::string("checkpoint encoder header: ") + e.what());
    }
    EncoderState s = init_encoder(c);
    for (Parameter* p : s.parameters()) r.values_into(p->value, p->name);
    if (frozen) freeze(s);
    ck.encoder = std::move(s);
  }
  if (flags & kHasBank) {
    const std::uint8_t mode = r.u8();
    if (mode > 1) throw ParseError("checkpoint bank: bad position mode");
    PromptBank bank(mode == 1 ? PositionMode::kAppend : PositionMode::kPrepend);
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      SoftPrompt p;
      p.generator_id = r.str(r.u32());
      const std::uint32_t m = r.u32();
      const std::uint32_t d = r.u32();
      const bool frozen = r.u8() != 0;
      Tensor values({m, d}, 0.0);
      r.need(static_cast<std::size_t>(m) * d * 8);
      for (double& v : values.data) v = r.f64();
      p.matrix = Parameter("prompt." + p.generator_id, std::move(values), true);
      const std::string id = p.generator_id;
      bank.add(std::move(p));
      if (frozen) bank.freeze(id);
    }
    ck.bank = std::move(bank);
  }
  if (flags & kHasClassifier) {
    const std::uint32_t d = r.u32();
    Classifier clf = Classifier::zeros(d);
    for (double& v : clf.weight.value.data) v = r.f64();
    clf.bias.value.data[0] = r.f64();
    ck.classifier = std::move(clf);
  }
  if (!r.done()) throw ParseError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize(checkpoint);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace deld
