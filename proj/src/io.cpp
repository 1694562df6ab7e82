#include "odmd/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "odmd/errors.hpp"
#include "odmd/presets.hpp"

namespace odmd {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

void append_real(std::string& out, double v) {
  if (!std::isfinite(v)) {
    throw ContractError("cannot serialize a non-finite value");
  }
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(len));
  if (!std::strpbrk(buf, ".e")) out += ".0";
}

std::size_t line_of(const std::string& text, std::size_t byte,
                    std::size_t* column) {
  std::size_t line = 1, start = 0;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      start = i + 1;
    }
  }
  *column = byte > start ? byte - start : 0;
  return line;
}

json parse_json(const std::string& text, std::size_t line_hint) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    if (line_hint > 0) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_hint,
                       e.byte > 0 ? e.byte - 1 : 0);
    }
    std::size_t column = 0;
    const std::size_t line = line_of(text, e.byte > 0 ? e.byte - 1 : 0, &column);
    throw ParseError(std::string("malformed JSON: ") + e.what(), line, column);
  }
}

// Strict object reader: records which keys were consumed so unknown fields
// can be reported by name.
class Fields {
 public:
  Fields(const json& obj, std::string where, std::size_t line = 0)
      : obj_(obj), where_(std::move(where)), line_(line) {
    if (!obj_.is_object()) fail(where_ + " must be a JSON object");
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json& at(const char* key) {
    if (!obj_.contains(key)) fail("missing field '" + qualified(key) + "'");
    used_.insert(key);
    return obj_.at(key);
  }

  double real(const char* key) {
    const json& v = at(key);
    if (!v.is_number()) fail("field '" + qualified(key) + "' must be a number");
    return v.get<double>();
  }

  std::uint64_t u64(const char* key) {
    const json& v = at(key);
    if (!v.is_number_unsigned()) {
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
      }
      fail("field '" + qualified(key) + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const char* key) {
    const json& v = at(key);
    if (!v.is_boolean()) fail("field '" + qualified(key) + "' must be true or false");
    return v.get<bool>();
  }

  std::string string(const char* key) {
    const json& v = at(key);
    if (!v.is_string()) fail("field '" + qualified(key) + "' must be a string");
    return v.get<std::string>();
  }

  // Optional variants leave `out` untouched when the key is absent.
  void opt(const char* key, double& out) {
    if (has(key)) out = real(key);
  }
  void opt(const char* key, std::size_t& out) {
    if (has(key)) out = static_cast<std::size_t>(u64(key));
  }
  void opt_u64(const char* key, std::uint64_t& out) {
    if (has(key)) out = u64(key);
  }

  std::string qualified(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!used_.count(item.key())) {
        fail("unknown field '" + qualified(item.key()) + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, line_, 0);
  }

  std::size_t line() const { return line_; }

 private:
  const json& obj_;
  std::string where_;
  std::size_t line_;
  std::set<std::string> used_;
};

void check_version(Fields& f, int expected, const char* what) {
  const std::uint64_t v = f.u64("schema_version");
  if (v != static_cast<std::uint64_t>(expected)) {
    throw VersionError(std::string(what) + " schema_version " +
                       std::to_string(v) + " is not supported (expected " +
                       std::to_string(expected) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset records

std::string encode_example_json(const DepthExample& ex) {
  std::string s;
  s.reserve(256 + 160 * ex.obs.size());
  auto field = [&](const char* name, double v, bool comma = true) {
    s += '"';
    s += name;
    s += "\":";
    append_real(s, v);
    if (comma) s += ',';
  };
  s += "{\"schema_version\":";
  s += std::to_string(kDatasetSchemaVersion);
  s += ",\"n\":";
  s += std::to_string(ex.obs.size());
  s += ",\"intrinsics\":{";
  field("fx", ex.k.fx);
  field("fy", ex.k.fy);
  field("cx", ex.k.cx);
  field("cy", ex.k.cy);
  field("width", ex.k.width);
  field("height", ex.k.height, false);
  s += "},\"observations\":[";
  for (std::size_t i = 0; i < ex.obs.size(); ++i) {
    const Observation& o = ex.obs[i];
    if (i) s += ',';
    s += '{';
    field("x", o.box.x);
    field("y", o.box.y);
    field("w", o.box.w);
    field("h", o.box.h);
    field("CX", o.position.x);
    field("CY", o.position.y);
    field("CZ", o.position.z, false);
    s += '}';
  }
  s += "],";
  field("label_Z", ex.label_z);
  s += "\"meta\":{";
  field("W", ex.meta.object.width);
  field("H", ex.meta.object.height);
  field("X1", ex.meta.object.x);
  field("Y1", ex.meta.object.y);
  field("Z1", ex.meta.object.z);
  s += "\"seed\":" + std::to_string(ex.meta.seed);
  s += ",\"index\":" + std::to_string(ex.meta.index);
  s += ",\"reversed\":";
  s += ex.meta.reversed ? "true" : "false";
  s += "}}";
  return s;
}

DepthExample decode_example_json(const std::string& text, std::size_t line) {
  const json doc = parse_json(text, line);
  Fields f(doc, "", line);
  check_version(f, kDatasetSchemaVersion, "dataset record");
  const std::uint64_t n = f.u64("n");

  DepthExample ex;
  {
    Fields k(f.at("intrinsics"), "intrinsics", line);
    ex.k.fx = k.real("fx");
    ex.k.fy = k.real("fy");
    ex.k.cx = k.real("cx");
    ex.k.cy = k.real("cy");
    ex.k.width = k.real("width");
    ex.k.height = k.real("height");
    k.finish();
  }
  const json& arr = f.at("observations");
  if (!arr.is_array()) f.fail("field 'observations' must be an array");
  if (arr.size() != n) {
    f.fail("'n' is " + std::to_string(n) + " but " + std::to_string(arr.size()) +
           " observations are listed");
  }
  if (n < 2) f.fail("a record needs at least two observations");
  std::vector<Observation> obs(n);
  for (std::size_t i = 0; i < n; ++i) {
    Fields o(arr[i], "observations[" + std::to_string(i) + "]", line);
    obs[i].box = {o.real("x"), o.real("y"), o.real("w"), o.real("h")};
    obs[i].position = {o.real("CX"), o.real("CY"), o.real("CZ")};
    o.finish();
  }
  ex.obs = ObservationSet(std::move(obs));
  ex.label_z = f.real("label_Z");
  {
    Fields m(f.at("meta"), "meta", line);
    ex.meta.object.width = m.real("W");
    ex.meta.object.height = m.real("H");
    ex.meta.object.x = m.real("X1");
    ex.meta.object.y = m.real("Y1");
    ex.meta.object.z = m.real("Z1");
    ex.meta.seed = m.u64("seed");
    ex.meta.index = m.u64("index");
    ex.meta.reversed = m.boolean("reversed");
    m.finish();
  }
  f.finish();
  return ex;
}

namespace {

constexpr char kDataMagic[8] = {'O', 'D', 'M', 'D', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kDataVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw ParseError("binary dataset is truncated", 0, pos_);
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* here() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_dataset_binary(
    std::span<const DepthExample> examples) {
  std::vector<std::uint8_t> out(kDataMagic, kDataMagic + 8);
  put<std::uint32_t>(out, kDataVersion);
  put<std::uint64_t>(out, examples.size());
  std::vector<std::uint8_t> rec;
  for (const DepthExample& ex : examples) {
    rec.clear();
    put<std::uint32_t>(rec, static_cast<std::uint32_t>(ex.obs.size()));
    for (double v : {ex.k.fx, ex.k.fy, ex.k.cx, ex.k.cy, ex.k.width, ex.k.height}) {
      put(rec, v);
    }
    put(rec, ex.label_z);
    for (const Observation& o : ex.obs) {
      for (double v : {o.box.x, o.box.y, o.box.w, o.box.h, o.position.x,
                       o.position.y, o.position.z}) {
        put(rec, v);
      }
    }
    const Object3D& obj = ex.meta.object;
    for (double v : {obj.width, obj.height, obj.x, obj.y, obj.z}) put(rec, v);
    put<std::uint64_t>(rec, ex.meta.seed);
    put<std::uint64_t>(rec, ex.meta.index);
    put<std::uint8_t>(rec, ex.meta.reversed ? 1 : 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rec.size()));
    out.insert(out.end(), rec.begin(), rec.end());
  }
  return out;
}

std::vector<DepthExample> decode_dataset_binary(
    std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kDataMagic, 8) != 0) {
    throw ParseError("not a binary dataset (bad magic)", 0, 0);
  }
  Reader r(bytes.subspan(8));
  const auto version = r.get<std::uint32_t>();
  if (version != kDataVersion) {
    throw VersionError("binary dataset version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kDataVersion) + ")");
  }
  const auto count = r.get<std::uint64_t>();
  // Each record takes at least its length prefix plus the fixed fields.
  if (count > r.remaining() / 4) {
    throw ParseError("binary dataset record count exceeds the file size", 0, 12);
  }
  std::vector<DepthExample> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t start = r.pos() + 8;
    const auto length = r.get<std::uint32_t>();
    if (length > r.remaining()) {
      throw ParseError("binary dataset record is truncated", 0, start);
    }
    Reader rec(std::span<const std::uint8_t>(r.here(), length));
    r.skip(length);
    DepthExample ex;
    const auto n = rec.get<std::uint32_t>();
    if (n < 2) throw ParseError("record has fewer than two observations", 0, start);
    ex.k.fx = rec.get<double>();
    ex.k.fy = rec.get<double>();
    ex.k.cx = rec.get<double>();
    ex.k.cy = rec.get<double>();
    ex.k.width = rec.get<double>();
    ex.k.height = rec.get<double>();
    ex.label_z = rec.get<double>();
    std::vector<Observation> obs(n);
    for (auto& o : obs) {
      o.box.x = rec.get<double>();
      o.box.y = rec.get<double>();
      o.box.w = rec.get<double>();
      o.box.h = rec.get<double>();
      o.position.x = rec.get<double>();
      o.position.y = rec.get<double>();
      o.position.z = rec.get<double>();
    }
    ex.obs = ObservationSet(std::move(obs));
    ex.meta.object.width = rec.get<double>();
    ex.meta.object.height = rec.get<double>();
    ex.meta.object.x = rec.get<double>();
    ex.meta.object.y = rec.get<double>();
    ex.meta.object.z = rec.get<double>();
    ex.meta.seed = rec.get<std::uint64_t>();
    ex.meta.index = rec.get<std::uint64_t>();
    ex.meta.reversed = rec.get<std::uint8_t>() != 0;
    if (rec.remaining() != 0) {
      throw ParseError("binary dataset record has trailing bytes", 0, start);
    }
    out.push_back(std::move(ex));
  }
  if (r.remaining() != 0) {
    throw ParseError("binary dataset has trailing bytes", 0, r.pos() + 8);
  }
  return out;
}

namespace {

bool is_binary_path(const std::string& path) {
  return path.ends_with(".odmd.bin");
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path + "'");
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

void save_dataset(const std::string& path,
                  std::span<const DepthExample> examples) {
  if (is_binary_path(path)) {
    const auto bytes = encode_dataset_binary(examples);
    write_text_file(path, std::string(bytes.begin(), bytes.end()));
    return;
  }
  std::string text;
  for (const DepthExample& ex : examples) {
    text += encode_example_json(ex);
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<DepthExample> load_dataset(const std::string& path) {
  const std::string text = read_text_file(path);
  if (is_binary_path(path)) {
    return decode_dataset_binary(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  std::vector<DepthExample> out;
  std::size_t start = 0, line = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line;
    std::string_view view(text.data() + start, end - start);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.find_first_not_of(" \t") != std::string_view::npos) {
      out.push_back(decode_example_json(std::string(view), line));
    }
    start = end + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configs

namespace {

json position_json(const CameraPosition& p) { return json::array({p.x, p.y, p.z}); }

CameraPosition position_from(Fields& f, const char* key) {
  const json& v = f.at(key);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() ||
      !v[1].is_number() || !v[2].is_number()) {
    f.fail("field '" + f.qualified(key) + "' must be an array of three numbers");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

json gen_json(const GenerationConfig& c) {
  json j;
  j["n"] = c.n;
  j["s_min"] = c.s_min;
  j["s_max"] = c.s_max;
  j["dp_min"] = position_json(c.dp_min);
  j["dp_max"] = position_json(c.dp_max);
  j["z1_min"] = c.z1_min;
  j["z1_max"] = c.z1_max;
  j["intrinsics"] = {{"fx", c.k.fx},       {"fy", c.k.fy},
                     {"cx", c.k.cx},       {"cy", c.k.cy},
                     {"width", c.k.width}, {"height", c.k.height}};
  j["reverse_prob"] = c.reverse_prob;
  const auto& r = c.perturb.replacement;
  j["perturb"] = {{"sigma_cam", c.perturb.sigma_cam},
                  {"sigma_box", c.perturb.sigma_box},
                  {"replace_prob", c.perturb.replace_prob},
                  {"replacement",
                   {{"center_min", r.center_min},
                    {"center_max", r.center_max},
                    {"size_min", r.size_min},
                    {"size_max", r.size_max}}}};
  j["seed"] = c.seed;
  return j;
}

// Overlays the fields present in j onto c.
void apply_gen(Fields& f, GenerationConfig& c) {
  f.opt("n", c.n);
  f.opt("s_min", c.s_min);
  f.opt("s_max", c.s_max);
  if (f.has("dp_min")) c.dp_min = position_from(f, "dp_min");
  if (f.has("dp_max")) c.dp_max = position_from(f, "dp_max");
  f.opt("z1_min", c.z1_min);
  f.opt("z1_max", c.z1_max);
  if (f.has("intrinsics")) {
    Fields k(f.at("intrinsics"), f.qualified("intrinsics"), f.line());
    k.opt("fx", c.k.fx);
    k.opt("fy", c.k.fy);
    k.opt("cx", c.k.cx);
    k.opt("cy", c.k.cy);
    k.opt("width", c.k.width);
    k.opt("height", c.k.height);
    k.finish();
  }
  f.opt("reverse_prob", c.reverse_prob);
  if (f.has("perturb")) {
    Fields p(f.at("perturb"), f.qualified("perturb"), f.line());
    p.opt("sigma_cam", c.perturb.sigma_cam);
    p.opt("sigma_box", c.perturb.sigma_box);
    p.opt("replace_prob", c.perturb.replace_prob);
    if (p.has("replacement")) {
      Fields r(p.at("replacement"), p.qualified("replacement"), p.line());
      auto& d = c.perturb.replacement;
      r.opt("center_min", d.center_min);
      r.opt("center_max", d.center_max);
      r.opt("size_min", d.size_min);
      r.opt("size_max", d.size_max);
      r.finish();
    }
    p.finish();
  }
  f.opt_u64("seed", c.seed);
}

void optional_version(Fields& f) {
  if (f.has("schema_version")) check_version(f, kConfigSchemaVersion, "config");
}

}  // namespace

std::string generation_config_to_json(const GenerationConfig& cfg) {
  json j = gen_json(cfg);
  j["schema_version"] = kConfigSchemaVersion;
  return j.dump(2) + "\n";
}

GenerationConfig generation_config_from_json(const std::string& text) {
  const json doc = parse_json(text, 0);
  Fields f(doc, "");
  optional_version(f);
  GenerationConfig cfg;
  if (f.has("base")) cfg = generation_preset(f.string("base"));
  apply_gen(f, cfg);
  f.finish();
  cfg.validate();
  return cfg;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["name"] = c.name;
  j["gen"] = gen_json(c.gen);
  j["loss_mode"] = to_string(c.loss_mode);
  j["network"] = {{"n", c.shape.n},
                  {"hidden", c.shape.hidden},
                  {"fc_width", c.shape.fc_width},
                  {"fc_layers", c.shape.fc_layers}};
  j["iterations"] = c.iterations;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.adam.lr;
  j["adam_beta1"] = c.adam.beta1;
  j["adam_beta2"] = c.adam.beta2;
  j["adam_eps"] = c.adam.eps;
  j["checkpoint_every"] = c.checkpoint_every;
  j["seed"] = c.seed;
  j["validation_sets"] = c.validation_sets;
  j["validation_size"] = c.validation_size;
  return j.dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
  const json doc = parse_json(text, 0);
  Fields f(doc, "");
  optional_version(f);
  TrainConfig c;
  if (f.has("base")) c = train_preset(f.string("base"));
  if (f.has("name")) c.name = f.string("name");
  if (f.has("gen")) {
    Fields g(f.at("gen"), "gen");
    if (g.has("base")) c.gen = generation_preset(g.string("base"));
    apply_gen(g, c.gen);
    g.finish();
  }
  if (f.has("loss_mode")) {
    try {
      c.loss_mode = parse_loss_mode(f.string("loss_mode"));
    } catch (const ConfigError& e) {
      f.fail(e.what());
    }
  }
  if (f.has("network")) {
    Fields s(f.at("network"), "network");
    s.opt("n", c.shape.n);
    s.opt("hidden", c.shape.hidden);
    s.opt("fc_width", c.shape.fc_width);
    s.opt("fc_layers", c.shape.fc_layers);
    s.finish();
  } else {
    c.shape.n = c.gen.n;
  }
  f.opt("iterations", c.iterations);
  f.opt("batch_size", c.batch_size);
  f.opt("lr", c.adam.lr);
  f.opt("adam_beta1", c.adam.beta1);
  f.opt("adam_beta2", c.adam.beta2);
  f.opt("adam_eps", c.adam.eps);
  f.opt("checkpoint_every", c.checkpoint_every);
  f.opt_u64("seed", c.seed);
  if (f.has("validation_sets")) {
    const json& v = f.at("validation_sets");
    if (!v.is_array()) f.fail("field 'validation_sets' must be an array of names");
    c.validation_sets.clear();
    for (const auto& name : v) {
      if (!name.is_string()) f.fail("field 'validation_sets' must hold strings");
      c.validation_sets.push_back(name.get<std::string>());
    }
  }
  f.opt("validation_size", c.validation_size);
  f.finish();
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  return train_config_from_json(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json stats_json(const ErrorStats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"median", s.median},
          {"min", s.min},     {"max", s.max},   {"std", s.std}};
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["method"] = report.method;
  json sets = json::array();
  for (const SetReport& s : report.sets) {
    json examples = json::array();
    for (const ExampleRecord& r : s.records) {
      json e = {{"index", r.index}, {"label_Z", r.label}};
      if (r.prediction) {
        e["prediction"] = *r.prediction;
        e["abs_error"] = r.abs_error;
        e["pct_error"] = r.pct_error;
      } else {
        e["prediction"] = nullptr;
        e["abs_error"] = nullptr;
        e["pct_error"] = nullptr;
        e["failure"] = r.failure;
      }
      examples.push_back(std::move(e));
    }
    sets.push_back({{"name", s.name},
                    {"count", s.records.size()},
                    {"failures", s.failures},
                    {"percent_error", stats_json(s.percent)},
                    {"absolute_error", stats_json(s.absolute)},
                    {"examples", std::move(examples)}});
  }
  j["sets"] = std::move(sets);
  j["all_sets"] = {{"rule", "unweighted mean of per-set mean percent error"},
                   {"mean_percent_error", report.all_sets_mean}};
  return j.dump(1) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "label_Z,prediction,abs_error,pct_error\n";
  for (const SetReport& s : report.sets) {
    for (const ExampleRecord& r : s.records) {
      append_real(out, r.label);
      out += ',';
      if (r.prediction) {
        append_real(out, *r.prediction);
        out += ',';
        append_real(out, r.abs_error);
        out += ',';
        append_real(out, r.pct_error);
      } else {
        out += ",,";
      }
      out += '\n';
    }
  }
  return out;
}

std::string train_log_line(const TrainLogRecord& rec) {
  json j = {{"iteration", rec.iteration},
            {"loss", rec.loss},
            {"val_error", rec.val_error}};
  return j.dump();
}

}  // namespace odmd
