#include "wsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "wsr/error.hpp"

namespace wsr {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string_view origin) : bytes_(bytes), origin_(origin) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string(origin_) + ": truncated checkpoint at offset " + std::to_string(pos_) +
                        " while reading " + what);
    }
  }
  [[noreturn]] void fail(std::size_t at, const std::string& what) const {
    throw FormatError(std::string(origin_) + ": " + what + " at offset " + std::to_string(at));
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string_view origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    std::size_t count = 1;
    for (auto x : e.extents) count *= x;
    if (count != e.values.size() || e.extents.empty()) {
      throw DimensionError("checkpoint entry " + e.name + ": extents do not match value count");
    }
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, static_cast<std::uint32_t>(e.extents.size()));
    for (auto x : e.extents) put_u32(out, x);
    for (float f : e.values) put_f32(out, f);
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes, std::string_view origin) {
  Reader r(bytes, origin);
  const std::string magic = r.str(4, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) r.fail(0, "bad magic '" + magic + "', expected 'WSR1'");
  const std::size_t version_at = r.pos();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) r.fail(version_at, "unsupported format version " + std::to_string(version));
  const std::uint32_t count = r.u32("entry count");
  std::vector<CheckpointEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::uint32_t name_len = r.u32("name length");
    e.name = r.str(name_len, "name");
    const std::size_t rank_at = r.pos();
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8) r.fail(rank_at, "invalid rank " + std::to_string(rank));
    std::uint64_t total = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      e.extents.push_back(r.u32("extent"));
      total *= e.extents.back();
      if (total > (bytes.size() / 4) + 1) r.fail(r.pos(), "extent product exceeds file size");
    }
    r.need(total * 4, "values");
    e.values.resize(total);
    for (std::uint64_t k = 0; k < total; ++k) e.values[k] = std::bit_cast<float>(r.u32("value"));
    entries.push_back(std::move(e));
  }
  if (!r.done()) r.fail(r.pos(), "trailing bytes after last entry");
  return entries;
}

void write_checkpoint_file(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
  const auto bytes = encode_checkpoint(entries);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot write checkpoint: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FileError("failed writing checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<CheckpointEntry> read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open checkpoint: " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes, path.string());
}

CheckpointEntry to_entry(std::string name, const Tensor& t) {
  const Shape& s = t.shape();
  const std::size_t dims[4] = {s.n, s.c, s.h, s.w};
  std::size_t first = 0;
  while (first < 3 && dims[first] == 1) ++first;
  CheckpointEntry e;
  e.name = std::move(name);
  for (std::size_t i = first; i < 4; ++i) e.extents.push_back(static_cast<std::uint32_t>(dims[i]));
  e.values.reserve(t.numel());
  for (double v : t.data()) e.values.push_back(static_cast<float>(v));
  return e;
}

Tensor from_entry(const CheckpointEntry& e) {
  if (e.extents.empty() || e.extents.size() > 4) {
    throw FormatError("checkpoint entry " + e.name + " has rank " + std::to_string(e.extents.size()) +
                      ", expected 1..4");
  }
  std::size_t dims[4] = {1, 1, 1, 1};
  const std::size_t off = 4 - e.extents.size();
  for (std::size_t i = 0; i < e.extents.size(); ++i) dims[off + i] = e.extents[i];
  std::vector<double> data(e.values.begin(), e.values.end());
  return Tensor({dims[0], dims[1], dims[2], dims[3]}, std::move(data));
}

CheckpointEntry u64_entry(std::string name, std::uint64_t v) {
  CheckpointEntry e{std::move(name), {4}, {}};
  for (int i = 0; i < 4; ++i) e.values.push_back(static_cast<float>((v >> (16 * i)) & 0xffffu));
  return e;
}

std::uint64_t entry_u64(const CheckpointEntry& e) {
  if (e.values.size() != 4) throw FormatError("checkpoint entry " + e.name + " is not an encoded integer");
  std::uint64_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const float f = e.values[i];
    if (!(f >= 0.0f && f <= 65535.0f) || f != static_cast<float>(static_cast<std::uint32_t>(f))) {
      throw FormatError("checkpoint entry " + e.name + " holds a malformed integer chunk");
    }
    v |= static_cast<std::uint64_t>(f) << (16 * i);
  }
  return v;
}

CheckpointEntry text_entry(std::string name, std::string_view text) {
  CheckpointEntry e{std::move(name), {static_cast<std::uint32_t>(text.size() ? text.size() : 1)}, {}};
  for (unsigned char c : text) e.values.push_back(static_cast<float>(c));
  if (text.empty()) e.values.push_back(0.0f);
  return e;
}

std::string entry_text(const CheckpointEntry& e) {
  std::string s;
  for (float f : e.values) {
    if (!(f >= 0.0f && f <= 255.0f)) throw FormatError("checkpoint entry " + e.name + " holds a non-byte value");
    if (f == 0.0f) break;
    s.push_back(static_cast<char>(static_cast<unsigned char>(f)));
  }
  return s;
}

const CheckpointEntry* find_entry_or_null(const std::vector<CheckpointEntry>& entries, std::string_view name) {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const CheckpointEntry& find_entry(const std::vector<CheckpointEntry>& entries, std::string_view name) {
  if (const auto* e = find_entry_or_null(entries, name)) return *e;
  throw FormatError("checkpoint has no entry named " + std::string(name));
}

void snap_to_f32(Tensor& t) {
  for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

void load_params(ParamSet& params, const std::vector<CheckpointEntry>& entries, std::string_view origin) {
  for (auto& p : params) {
    const CheckpointEntry* e = find_entry_or_null(entries, p.name);
    if (!e) throw FormatError(std::string(origin) + ": missing parameter " + p.name);
    Tensor t = from_entry(*e);
    if (t.shape() != p.value.shape()) {
      throw DimensionError(std::string(origin) + ": parameter " + p.name + " has shape " + to_string(t.shape()) +
                           ", model expects " + to_string(p.value.shape()));
    }
    p.value = std::move(t);
  }
}

void save_generator(const std::filesystem::path& path, Generator& gen) {
  std::vector<CheckpointEntry> entries;
  for (auto& p : gen.params()) {
    snap_to_f32(p.value);
    entries.push_back(to_entry(p.name, p.value));
  }
  write_checkpoint_file(path, entries);
}

Generator generator_from_entries(const std::vector<CheckpointEntry>& entries) {
  const Tensor embed = from_entry(find_entry(entries, "gen.embed.weight"));
  GeneratorConfig cfg;
  cfg.features = embed.shape().n;
  if (embed.shape().c == kColorChannels) {
    cfg.input = GeneratorInput::pixels;
  } else if (embed.shape().c == 5 * kColorChannels) {
    cfg.input = GeneratorInput::wavelet;
  } else {
    throw FormatError("checkpoint: generator embed layer has " + std::to_string(embed.shape().c) + " input channels");
  }
  cfg.blocks = 0;
  while (find_entry_or_null(entries, "gen.block" + std::to_string(cfg.blocks) + ".conv1.weight")) ++cfg.blocks;
  Generator gen(cfg);
  load_params(gen.params(), entries, "checkpoint");
  return gen;
}

Generator load_generator(const std::filesystem::path& path) { return generator_from_entries(read_checkpoint_file(path)); }

}  // namespace wsr
