#include "wsr/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wsr/dataset.hpp"
#include "wsr/error.hpp"

namespace wsr {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + std::string(key) + "': invalid number '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + std::string(key) + "': invalid non-negative integer '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true/false, got '" + std::string(v) + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (scale != kScale) throw ConfigError("scale must be 4, got " + std::to_string(scale));
  if (crop_size == 0 || crop_size % 4 != 0) throw ConfigError("crop_size must be a positive multiple of 4");
  if (crop_size / 4 < 4) throw ConfigError("crop_size must be at least 16");
  if (model.features == 0) throw ConfigError("features must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  weights.validate();
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  const std::string_view v = trim(value);
  if (key == "learning_rate") {
    learning_rate = parse_double(key, v);
  } else if (key == "batch_size") {
    batch_size = parse_uint(key, v);
  } else if (key == "iterations") {
    iterations = parse_uint(key, v);
  } else if (key == "epochs") {
    epochs = parse_uint(key, v);
  } else if (key == "seed") {
    seed = parse_uint(key, v);
  } else if (key == "lambda_adv") {
    weights.lambda_adv = parse_double(key, v);
  } else if (key == "lambda_wavelet") {
    weights.lambda_wavelet = parse_double(key, v);
  } else if (key == "alpha") {
    std::size_t i = 0;
    std::string_view rest = v;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = trim(rest.substr(0, comma));
      if (i >= weights.alpha.size()) throw ConfigError("config key 'alpha': more than 16 entries");
      weights.alpha[i++] = parse_double(key, item);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (i != weights.alpha.size()) throw ConfigError("config key 'alpha': expected 16 entries, got " + std::to_string(i));
  } else if (key == "adversarial") {
    adversarial = parse_bool(key, v);
  } else if (key == "features") {
    model.features = parse_uint(key, v);
  } else if (key == "blocks") {
    model.blocks = parse_uint(key, v);
  } else if (key == "input") {
    if (v == "pixels") {
      model.input = GeneratorInput::pixels;
    } else if (v == "wavelet") {
      model.input = GeneratorInput::wavelet;
    } else {
      throw ConfigError("config key 'input': expected pixels or wavelet, got '" + std::string(v) + "'");
    }
  } else if (key == "data") {
    data = std::string(v);
  } else if (key == "crop_size") {
    crop_size = parse_uint(key, v);
  } else if (key == "scale") {
    scale = parse_uint(key, v);
  } else if (key == "checkpoint_interval") {
    checkpoint_interval = parse_uint(key, v);
  } else if (key == "output") {
    output = std::string(v);
  } else if (key == "adam_beta1") {
    adam_beta1 = parse_double(key, v);
  } else if (key == "adam_beta2") {
    adam_beta2 = parse_double(key, v);
  } else if (key == "adam_eps") {
    adam_eps = parse_double(key, v);
  } else if (key == "extractor") {
    extractor = std::string(v);
  } else if (key == "extractor_seed") {
    extractor_seed = parse_uint(key, v);
  } else if (key == "audit") {
    audit = parse_bool(key, v);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "learning_rate = " << fmt_double(learning_rate) << '\n';
  os << "batch_size = " << batch_size << '\n';
  os << "iterations = " << iterations << '\n';
  os << "epochs = " << epochs << '\n';
  os << "seed = " << seed << '\n';
  os << "lambda_adv = " << fmt_double(weights.lambda_adv) << '\n';
  os << "lambda_wavelet = " << fmt_double(weights.lambda_wavelet) << '\n';
  os << "alpha = ";
  for (std::size_t i = 0; i < weights.alpha.size(); ++i) os << (i ? "," : "") << fmt_double(weights.alpha[i]);
  os << '\n';
  os << "adversarial = " << (adversarial ? "true" : "false") << '\n';
  os << "features = " << model.features << '\n';
  os << "blocks = " << model.blocks << '\n';
  os << "input = " << (model.input == GeneratorInput::pixels ? "pixels" : "wavelet") << '\n';
  os << "data = " << data << '\n';
  os << "crop_size = " << crop_size << '\n';
  os << "scale = " << scale << '\n';
  os << "checkpoint_interval = " << checkpoint_interval << '\n';
  os << "output = " << output << '\n';
  os << "adam_beta1 = " << fmt_double(adam_beta1) << '\n';
  os << "adam_beta2 = " << fmt_double(adam_beta2) << '\n';
  os << "adam_eps = " << fmt_double(adam_eps) << '\n';
  os << "extractor = " << extractor << '\n';
  os << "extractor_seed = " << extractor_seed << '\n';
  os << "audit = " << (audit ? "true" : "false") << '\n';
  return os.str();
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  TrainConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

bool TrainConfig::operator==(const TrainConfig& o) const { return to_text() == o.to_text(); }

}  // namespace wsr
