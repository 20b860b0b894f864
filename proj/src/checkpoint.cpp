#include "salsa/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "salsa/error.h"

namespace salsa {

namespace {

const char kMagic[8] = {'S', 'A', 'L', 'S', 'A', 'C', 'K', 'P'};

template <class T>
void putLE(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

void putDouble(std::string& out, double v) {
  putLE(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }
  std::string bytes(std::uint64_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  double getDouble() {
    return std::bit_cast<double>(get<std::uint64_t>());
  }
  std::size_t position() const {
    return pos_;
  }

 private:
  void need(std::uint64_t n) const {
    if (n > end_ - pos_) {
      throw IntegrityError("checkpoint: truncated file");
    }
  }

  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

} // namespace

std::uint64_t fnv1a64(const std::string& bytes, std::size_t length) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < length; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::string& CheckpointFile::text(const std::string& name) const {
  for (const auto& [k, v] : texts) {
    if (k == name) {
      return v;
    }
  }
  throw IntegrityError("checkpoint: missing section '" + name + "'");
}

bool CheckpointFile::hasText(const std::string& name) const {
  for (const auto& [k, v] : texts) {
    if (k == name) {
      return true;
    }
  }
  return false;
}

const CheckpointRecord& CheckpointFile::record(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) {
      return r;
    }
  }
  throw IntegrityError("checkpoint: missing record '" + name + "'");
}

bool CheckpointFile::hasRecord(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) {
      return true;
    }
  }
  return false;
}

std::string encodeCheckpoint(const CheckpointFile& file) {
  std::string out(kMagic, sizeof(kMagic));
  putLE<std::uint32_t>(out, kCheckpointVersion);
  putLE<std::uint32_t>(out, static_cast<std::uint32_t>(file.texts.size()));
  for (const auto& [name, body] : file.texts) {
    putLE<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    putLE<std::uint64_t>(out, body.size());
    out += body;
  }
  putLE<std::uint32_t>(out, static_cast<std::uint32_t>(file.records.size()));
  for (const auto& r : file.records) {
    if (shapeNumel(r.shape) != r.data.size()) {
      throw DimensionError("checkpoint: record '" + r.name + "' shape does not match its data");
    }
    putLE<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    putLE<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) {
      putLE<std::uint64_t>(out, d);
    }
    for (double v : r.data) {
      putDouble(out, v);
    }
  }
  putLE<std::uint64_t>(out, fnv1a64(out, out.size()));
  return out;
}

CheckpointFile decodeCheckpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError("checkpoint: not a checkpoint file (bad magic)");
  }
  const auto bodyEnd = bytes.size() - 8;
  Reader tail(bytes, bytes.size());
  tail.bytes(bodyEnd);
  const auto stored = tail.get<std::uint64_t>();

  Reader in(bytes, bodyEnd);
  in.bytes(sizeof(kMagic));
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IntegrityError(
        "checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
        std::to_string(kCheckpointVersion) + ")");
  }
  if (fnv1a64(bytes, bodyEnd) != stored) {
    throw IntegrityError("checkpoint: checksum mismatch");
  }
  CheckpointFile file;
  const auto nTexts = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nTexts; ++i) {
    auto name = in.bytes(in.get<std::uint32_t>());
    auto body = in.bytes(in.get<std::uint64_t>());
    file.texts.emplace_back(std::move(name), std::move(body));
  }
  const auto nRecords = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nRecords; ++i) {
    CheckpointRecord r;
    r.name = in.bytes(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = in.get<std::uint64_t>();
      if (dim == 0 || numel > (bodyEnd / 8) / dim) {
        throw IntegrityError("checkpoint: implausible shape in record '" + r.name + "'");
      }
      numel *= dim;
      r.shape.push_back(dim);
    }
    if (numel * 8 > bodyEnd - in.position()) {
      throw IntegrityError("checkpoint: truncated file");
    }
    r.data.resize(numel);
    for (auto& v : r.data) {
      v = in.getDouble();
    }
    file.records.push_back(std::move(r));
  }
  if (in.position() != bodyEnd) {
    throw IntegrityError("checkpoint: trailing bytes after the last record");
  }
  return file;
}

void writeCheckpoint(const std::string& path, const CheckpointFile& file) {
  const auto bytes = encodeCheckpoint(file);
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw InputError("checkpoint: cannot write " + path);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw InputError("checkpoint: failed writing " + path);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw InputError("checkpoint: cannot move " + tmp + " to " + path);
  }
}

CheckpointFile readCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("checkpoint: cannot read " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return decodeCheckpoint(ss.str());
}

} // namespace salsa
