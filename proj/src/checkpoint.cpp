#include "yflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace yflow {

namespace {

constexpr char kMagic[8] = {'Y', 'F', 'L', 'O', 'W', 'C', 'K', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

class Reader {
 public:
  Reader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_end() const {
    if (pos_ != bytes_.size())
      throw config_error("checkpoint '" + path_ + "' has trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw config_error("checkpoint '" + path_ + "' is truncated");
  }
  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u32(out, ckpt.version);
  put_u64(out, ckpt.config_text.size());
  out += ckpt.config_text;
  put_u64(out, ckpt.iteration);
  put_u64(out, ckpt.params.size());
  for (const Tensor& p : ckpt.params) {
    put_u32(out, static_cast<std::uint32_t>(p.rank()));
    for (std::size_t d : p.shape) put_u64(out, d);
    for (double x : p.vals()) put_f64(out, x);
  }
  put_u64(out, ckpt.stats.rows);
  put_f64(out, ckpt.stats.last_total);
  put_f64(out, ckpt.stats.last_action);
  put_f64(out, ckpt.stats.last_sinkhorn);
  put_f64(out, ckpt.stats.last_sobolev);
  put_f64(out, ckpt.stats.best_total);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw config_error("cannot write checkpoint '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw config_error("short write to checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path);

  const std::string magic = r.str(sizeof kMagic);
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0)
    throw config_error("'" + path + "' is not a checkpoint file (bad magic)");
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != Checkpoint::kVersion)
    throw config_error("checkpoint '" + path + "' has format version " +
                       std::to_string(ckpt.version) + ", this build reads version " +
                       std::to_string(Checkpoint::kVersion));
  ckpt.config_text = r.str(r.u64());
  ckpt.iteration = r.u64();
  const std::uint64_t n_params = r.u64();
  for (std::uint64_t i = 0; i < n_params; ++i) {
    const std::uint32_t rank = r.u32();
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.u64());
    std::vector<double> data(shape_numel(shape));
    for (double& x : data) x = r.f64();
    ckpt.params.push_back(Tensor::from(shape, std::move(data)));
  }
  ckpt.stats.rows = r.u64();
  ckpt.stats.last_total = r.f64();
  ckpt.stats.last_action = r.f64();
  ckpt.stats.last_sinkhorn = r.f64();
  ckpt.stats.last_sobolev = r.f64();
  ckpt.stats.best_total = r.f64();
  r.expect_end();
  return ckpt;
}

std::pair<RunConfig, VelocityNet> net_from_checkpoint(const Checkpoint& ckpt) {
  RunConfig rc = RunConfig::from_text(ckpt.config_text);
  if (ckpt.params.empty()) throw config_error("checkpoint stores no parameters");
  const Tensor& head_bias = ckpt.params.back();
  VelocityNetConfig nc = rc.net;
  nc.dim = head_bias.numel();
  VelocityNet net(nc);
  if (net.params().size() != ckpt.params.size())
    throw config_error("checkpoint stores " + std::to_string(ckpt.params.size()) +
                       " tensors, the echoed architecture expects " +
                       std::to_string(net.params().size()));
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    if (net.params()[i].shape != ckpt.params[i].shape)
      throw config_error("checkpoint tensor '" + net.param_names()[i] + "' has shape " +
                         shape_str(ckpt.params[i].shape) + ", expected " +
                         shape_str(net.params()[i].shape));
    net.params()[i] = ckpt.params[i];
  }
  return {std::move(rc), std::move(net)};
}

}  // namespace yflow
