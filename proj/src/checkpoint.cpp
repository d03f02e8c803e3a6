#include "lwta/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "lwta/error.hpp"
#include "lwta/tensor_io.hpp"

namespace lwta {

namespace {

constexpr const char* kMagicLine = "LWTA-CHECKPOINT";

std::string expect_line(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw CheckpointError("checkpoint header truncated");
  return line;
}

std::string expect_field(std::istream& is, const std::string& key) {
  const std::string line = expect_line(is);
  const std::string prefix = key + "=";
  if (line.rfind(prefix, 0) != 0) {
    throw CheckpointError("checkpoint header: expected '" + prefix + "...', got '" + line + "'");
  }
  return line.substr(prefix.size());
}

std::uint64_t to_u64(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw CheckpointError("checkpoint header: bad " + what + " '" + s + "'");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  const auto specs = ck.net.specs();
  os << kMagicLine << '\n';
  os << "version=" << kCheckpointVersion << '\n';
  os << "iteration=" << ck.iteration << '\n';
  os << "seed=" << ck.seed << '\n';
  os << "layers=" << specs.size() << '\n';
  for (const auto& s : specs) {
    os << "layer=" << s.in_dim << ' ' << s.blocks << ' ' << s.block_size << ' '
       << to_string(s.activation) << ' ' << to_string(s.weight_mode) << ' ' << (s.bias ? 1 : 0)
       << '\n';
  }
  for (const auto& [k, v] : ck.config) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw CheckpointError("config entry '" + k + "' cannot be stored in a checkpoint header");
    }
    os << "config." << k << '=' << v << '\n';
  }
  const auto params = ck.net.parameters();
  os << "tensors=" << params.size() << '\n';
  os << "end\n";
  for (const auto* p : params) write_stlw(os, *p);
  if (!os) throw CheckpointError("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
  if (expect_line(is) != kMagicLine) throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = to_u64(expect_field(is, "version"), "version");
  if (version != static_cast<std::uint64_t>(kCheckpointVersion)) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) +
                          ")");
  }
  Checkpoint ck;
  ck.iteration = to_u64(expect_field(is, "iteration"), "iteration");
  ck.seed = to_u64(expect_field(is, "seed"), "seed");
  const auto n_layers = to_u64(expect_field(is, "layers"), "layer count");

  std::vector<LayerSpec> specs;
  for (std::uint64_t l = 0; l < n_layers; ++l) {
    std::istringstream ls(expect_field(is, "layer"));
    LayerSpec s;
    std::string act, weights;
    int bias = 0;
    if (!(ls >> s.in_dim >> s.blocks >> s.block_size >> act >> weights >> bias)) {
      throw CheckpointError("checkpoint header: malformed layer line " + std::to_string(l));
    }
    try {
      s.activation = parse_activation(act);
      s.weight_mode = parse_weight_mode(weights);
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("checkpoint header: ") + e.what());
    }
    s.bias = bias != 0;
    specs.push_back(s);
  }

  std::string line = expect_line(is);
  while (line.rfind("config.", 0) == 0) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("checkpoint header: bad line '" + line + "'");
    ck.config.emplace_back(line.substr(7, eq - 7), line.substr(eq + 1));
    line = expect_line(is);
  }
  if (line.rfind("tensors=", 0) != 0) {
    throw CheckpointError("checkpoint header: expected 'tensors=...', got '" + line + "'");
  }
  const auto n_tensors = to_u64(line.substr(8), "tensor count");
  if (expect_line(is) != "end") throw CheckpointError("checkpoint header: missing 'end'");

  Network<float> net;
  try {
    net = Network<float>::zeros(specs);
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint architecture invalid: ") + e.what());
  }
  auto params = net.parameters();
  if (params.size() != n_tensors) {
    throw CheckpointError("checkpoint holds " + std::to_string(n_tensors) +
                          " tensors, architecture needs " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<float> t;
    try {
      t = read_stlw<float>(is);
    } catch (const DataError& e) {
      throw CheckpointError("checkpoint tensor " + std::to_string(i) + ": " + e.what());
    }
    if (t.shape() != params[i]->shape()) {
      throw CheckpointError("checkpoint tensor " + std::to_string(i) + " has shape " +
                            shape_str(t.shape()) + ", expected " +
                            shape_str(params[i]->shape()));
    }
    *params[i] = std::move(t);
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("trailing bytes after the last checkpoint tensor");
  }
  ck.net = std::move(net);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  // Write to a sibling file first so an interrupted save never clobbers the last good one.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    write_checkpoint(os, ck);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace lwta
