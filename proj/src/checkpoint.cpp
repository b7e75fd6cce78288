#include "pmnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pmnet/error.hpp"

namespace pmnet {

namespace {

constexpr const char* kMagic = "PMNET1";

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

void write_doubles(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v[i]));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
}

Vector read_doubles(std::istream& in, Index n, const std::string& name) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    char buf[8];
    if (!in.read(buf, 8)) throw LoadError("checkpoint truncated inside parameter " + name);
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    v[i] = std::bit_cast<double>(to_little(bits));
  }
  return v;
}

std::size_t read_count(std::istream& in, const std::string& label) {
  std::string line;
  if (!std::getline(in, line)) throw LoadError("checkpoint truncated before '" + label + "'");
  std::istringstream is(line);
  std::string word;
  long long count = -1;
  if (!(is >> word >> count) || word != label || count < 0) {
    throw LoadError("checkpoint: expected '" + label + " <count>', got '" + line + "'");
  }
  return static_cast<std::size_t>(count);
}

}  // namespace

void save_checkpoint(std::ostream& out, const Tagger& tagger, const KeyValues& extra) {
  KeyValues kv = extra;
  for (auto& [k, v] : tagger.config().to_kv()) kv[k] = v;
  kv["vocab.tokens"] = join(tagger.vocab().tokens());
  kv["vocab.pos"] = join(tagger.vocab().pos_tags());
  kv["vocab.min_count"] = std::to_string(tagger.vocab().min_count());

  out << kMagic << '\n' << "config " << kv.size() << '\n';
  for (const auto& [k, v] : kv) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractError("checkpoint: key or value not representable: " + k);
    }
    out << k << '=' << v << '\n';
  }
  const ParamStore& ps = tagger.params();
  out << "params " << ps.size() << '\n';
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Tensor& t = ps.at(i);
    out << ps.name(i) << ' ' << t.shape.size();
    for (Index d : t.shape) out << ' ' << d;
    out << '\n';
    write_doubles(out, t.values);
  }
  if (!out) throw Error("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const Tagger& tagger, const KeyValues& extra) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_checkpoint(out, tagger, extra);
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw LoadError("not a checkpoint (bad magic line)");

  Checkpoint ck;
  const std::size_t nconfig = read_count(in, "config");
  for (std::size_t i = 0; i < nconfig; ++i) {
    if (!std::getline(in, line)) throw LoadError("checkpoint truncated in config block");
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) throw LoadError("checkpoint: malformed config line '" + line + "'");
    ck.config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  try {
    ck.model = ModelConfig::from_kv(ck.config);
    ck.vocab = Vocabulary(split(kv_string(ck.config, "vocab.tokens", "")), split(kv_string(ck.config, "vocab.pos", "")),
                          kv_uint(ck.config, "vocab.min_count", 10));
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    throw LoadError(std::string("checkpoint config: ") + e.what());
  }

  const std::size_t nparams = read_count(in, "params");
  for (std::size_t i = 0; i < nparams; ++i) {
    if (!std::getline(in, line)) throw LoadError("checkpoint truncated in parameter block");
    std::istringstream is(line);
    std::string name;
    long long rank = -1;
    if (!(is >> name >> rank) || rank < 0 || rank > 8) throw LoadError("checkpoint: bad parameter header '" + line + "'");
    Shape shape;
    for (long long r = 0; r < rank; ++r) {
      long long d = 0;
      if (!(is >> d) || d <= 0) throw LoadError("checkpoint: bad dimension in '" + line + "'");
      shape.push_back(static_cast<Index>(d));
    }
    const Index n = shape_size(shape);
    ck.params.add(name, Tensor(shape, read_doubles(in, n, name), true));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError("checkpoint: trailing data after parameters");
  // Validates the parameter layout against the config.
  Tagger check(ck.model, ck.vocab, ck.params);
  ck.params = std::move(check.params());
  return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path);
  try {
    return load_checkpoint(in);
  } catch (const LoadError& e) {
    throw LoadError(path + ": " + e.what());
  }
}

Tagger load_tagger(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  return Tagger(std::move(ck.model), std::move(ck.vocab), std::move(ck.params));
}

}  // namespace pmnet
