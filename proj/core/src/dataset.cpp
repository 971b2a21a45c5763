// SPDX-License-Identifier: Apache-2.0
#include "stgsnas/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "stgsnas/errors.hpp"
#include "stgsnas/sampler.hpp"

namespace stgsnas {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::string_view to_string(PlantedRule rule) {
  switch (rule) {
    case PlantedRule::XorCrossModal: return "xor-crossmodal";
    case PlantedRule::UnimodalImage: return "unimodal-image";
    case PlantedRule::UnimodalSpeech: return "unimodal-speech";
  }
  return "?";
}

PlantedRule planted_rule_from_string(std::string_view name) {
  if (name == "xor" || name == "xor-crossmodal") return PlantedRule::XorCrossModal;
  if (name == "unimodal-image") return PlantedRule::UnimodalImage;
  if (name == "unimodal-speech") return PlantedRule::UnimodalSpeech;
  throw ContractError("unknown planted rule '" + std::string(name) + "'");
}

void PlantedTaskSpec::validate() const {
  if (num_image_features < 1 || num_speech_features < 1 || width < 1)
    throw ContractError("feature counts and width must be positive");
  auto check_dims = [this](const std::vector<int>& dims, const char* name) {
    if (dims.empty()) throw ContractError(std::string(name) + " signal dims are empty");
    for (int d : dims)
      if (d < 0 || d >= width) throw ContractError(std::string(name) + " signal dim out of [0, width)");
  };
  check_dims(image_signal_dims, "image");
  check_dims(speech_signal_dims, "speech");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ContractError("noise_sigma must be >= 0");
  if (!(signal_margin >= 0.0) || !std::isfinite(signal_margin)) throw ContractError("signal_margin must be >= 0");
  if (n_train == 0 || n_val == 0 || n_test == 0) throw ContractError("every split needs at least one sample");
}

void BimodalDataset::validate() const {
  const std::size_t n = labels.size();
  if (image.rank() != 3 || speech.rank() != 3) throw DataError("feature tensors must be rank 3");
  if (image.dim(0) != n || speech.dim(0) != n) throw DataError("sample counts differ across fields");
  if (image.dim(2) != speech.dim(2)) throw DataError("image and speech widths differ");
  for (int y : labels)
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
  if (!sample_ids.empty() && sample_ids.size() != n) throw DataError("sample id count differs from labels");
}

void BimodalDataset::gather(std::span<const std::size_t> rows, Tensor& image_out, Tensor& speech_out,
                            std::vector<int>& labels_out) const {
  const std::size_t ni = image.dim(1) * image.dim(2);
  const std::size_t ns = speech.dim(1) * speech.dim(2);
  image_out = Tensor({rows.size(), image.dim(1), image.dim(2)});
  speech_out = Tensor({rows.size(), speech.dim(1), speech.dim(2)});
  labels_out.resize(rows.size());
  const double* src_i = image.data().data();
  const double* src_s = speech.data().data();
  double* dst_i = image_out.data().data();
  double* dst_s = speech_out.data().data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t row = rows[r];
    if (row >= size()) throw ContractError("row index out of range");
    std::copy_n(src_i + row * ni, ni, dst_i + r * ni);
    std::copy_n(src_s + row * ns, ns, dst_s + r * ns);
    labels_out[r] = labels[row];
  }
}

BimodalDataset BimodalDataset::subset(std::span<const std::size_t> rows) const {
  BimodalDataset out;
  gather(rows, out.image, out.speech, out.labels);
  out.split = split;
  out.provenance = provenance;
  if (!sample_ids.empty())
    for (auto r : rows) out.sample_ids.push_back(sample_ids[r]);
  return out;
}

std::uint64_t BimodalDataset::sample_hash(std::size_t row) const {
  const std::size_t ni = image.dim(1) * image.dim(2);
  const std::size_t ns = speech.dim(1) * speech.dim(2);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t k = 0; k < ni; ++k) mix(image.data()[row * ni + k]);
  for (std::size_t k = 0; k < ns; ++k) mix(speech.data()[row * ns + k]);
  return h;
}

namespace {

double normal(NoiseCursor& cur) {
  // Box-Muller; u1 is kept away from 0.
  const double u1 = cur.next_clamped_uniform();
  const double u2 = cur.next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

BimodalDataset generate_split(const PlantedTaskSpec& spec, std::uint64_t seed, Split split,
                              std::uint64_t first_id, std::size_t n) {
  const auto ni = static_cast<std::size_t>(spec.num_image_features);
  const auto ns = static_cast<std::size_t>(spec.num_speech_features);
  const auto c = static_cast<std::size_t>(spec.width);
  BimodalDataset d;
  d.split = split;
  d.image = Tensor({n, ni, c});
  d.speech = Tensor({n, ns, c});
  d.labels.resize(n);
  d.sample_ids.resize(n);
  d.provenance = "synthetic:" + std::string(to_string(spec.rule)) + ":seed=" + std::to_string(seed);

  // Exactly balanced labels, shuffled with a per-split stream.
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = i < n / 2 ? 0 : 1;
  NoiseCursor order(SeededRng(seed, stable_hash("labels")).substream(static_cast<std::uint64_t>(split)));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(order.next_uniform() * static_cast<double>(i));
    std::swap(d.labels[i - 1], d.labels[std::min(j, i - 1)]);
  }

  const SeededRng samples(seed, stable_hash("samples"));
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t id = first_id + i;
    d.sample_ids[i] = id;
    NoiseCursor cur(samples.substream(id));
    const bool y = d.labels[i] == 1;
    auto magnitude = [&] { return spec.signal_margin + std::abs(normal(cur)); };
    const bool coin = cur.next_uniform() < 0.5;
    bool u_pos = coin;
    bool v_pos = !coin;
    switch (spec.rule) {
      case PlantedRule::XorCrossModal:
        u_pos = coin;
        v_pos = u_pos != y;
        break;
      case PlantedRule::UnimodalImage:
        u_pos = y;
        v_pos = coin;
        break;
      case PlantedRule::UnimodalSpeech:
        u_pos = coin;
        v_pos = y;
        break;
    }
    const double u = (u_pos ? 1.0 : -1.0) * magnitude();
    const double v = (v_pos ? 1.0 : -1.0) * magnitude();

    auto fill = [&](Tensor& t, std::size_t nodes, const std::vector<int>& dims, double latent) {
      double* row = t.data().data() + i * nodes * c;
      for (std::size_t k = 0; k < nodes * c; ++k) row[k] = spec.noise_sigma * normal(cur);
      for (std::size_t node = 0; node < nodes; ++node)
        for (int dim : dims) row[node * c + static_cast<std::size_t>(dim)] += latent;
    };
    fill(d.image, ni, spec.image_signal_dims, u);
    fill(d.speech, ns, spec.speech_signal_dims, v);
  }
  return d;
}

// Little-endian byte writer / reader for the feature format.
struct Writer {
  std::vector<std::uint8_t> out;
  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) {
    for (int b = 0; b < 2; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
};

std::uint64_t read_le(std::span<const std::uint8_t> bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(bytes[offset + static_cast<std::size_t>(b)]) << (8 * b);
  return v;
}

constexpr std::uint8_t kMagic[4] = {'B', 'M', 'N', 'F'};
constexpr std::uint16_t kFormatVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 * 4;

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

}  // namespace

SyntheticSplits generate(const PlantedTaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticSplits s;
  s.train = generate_split(spec, seed, Split::Train, 0, spec.n_train);
  s.val = generate_split(spec, seed, Split::Val, spec.n_train, spec.n_val);
  s.test = generate_split(spec, seed, Split::Test, spec.n_train + spec.n_val, spec.n_test);
  return s;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1U << 30));
    crc = ::crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_features(const BimodalDataset& data) {
  data.validate();
  auto fits_u32 = [](std::size_t v) { return v <= 0xffffffffULL; };
  if (!fits_u32(data.size()) || !fits_u32(data.image.dim(1)) || !fits_u32(data.speech.dim(1)) ||
      !fits_u32(data.image.dim(2)))
    throw DataError("dataset dimensions exceed the feature-file header range");
  Writer w;
  w.out.reserve(kHeaderBytes + data.size() + 8 * (data.image.numel() + data.speech.numel()) + 4);
  for (auto b : kMagic) w.u8(b);
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(data.size()));
  w.u32(static_cast<std::uint32_t>(data.image.dim(1)));
  w.u32(static_cast<std::uint32_t>(data.speech.dim(1)));
  w.u32(static_cast<std::uint32_t>(data.image.dim(2)));
  for (int y : data.labels) w.u8(static_cast<std::uint8_t>(y));
  for (double v : data.image.data()) w.f64(v);
  for (double v : data.speech.data()) w.f64(v);
  w.u32(crc32(w.out));
  return std::move(w.out);
}

BimodalDataset decode_features(std::span<const std::uint8_t> bytes, std::string_view source) {
  const std::size_t size = bytes.size();
  if (size < 4) throw ParseError(size, "truncated before the magic number");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) throw ParseError(0, "bad magic, expected BMNF");
  if (size < kHeaderBytes) throw ParseError(size, "truncated inside the header");
  const auto version = static_cast<std::uint16_t>(read_le(bytes, 4, 2));
  if (version != kFormatVersion) throw ParseError(4, "unsupported version " + std::to_string(version));
  const std::uint64_t n = read_le(bytes, 6, 4);
  const std::uint64_t n_i = read_le(bytes, 10, 4);
  const std::uint64_t n_s = read_le(bytes, 14, 4);
  const std::uint64_t c = read_le(bytes, 18, 4);
  if (n == 0 || n_i == 0 || n_s == 0 || c == 0) throw FeatureShapeError("header declares an empty feature block");

  // Saturating size arithmetic; a saturated value can never equal `size`.
  auto mul = [](std::uint64_t a, std::uint64_t b) -> std::uint64_t {
    return a != 0 && b > UINT64_MAX / a ? UINT64_MAX : a * b;
  };
  auto add = [](std::uint64_t a, std::uint64_t b) -> std::uint64_t { return b > UINT64_MAX - a ? UINT64_MAX : a + b; };
  const std::uint64_t expected = add(add(kHeaderBytes + 4, n), mul(mul(mul(8, n), n_i + n_s), c));
  if (expected != size) {
    const bool intact =
        size >= kHeaderBytes + 4 &&
        crc32(bytes.first(size - 4)) == static_cast<std::uint32_t>(read_le(bytes, size - 4, 4));
    const std::string declared = "header declares N=" + std::to_string(n) + ", N_I=" + std::to_string(n_i) +
                                 ", N_S=" + std::to_string(n_s) + ", C=" + std::to_string(c);
    if (intact) {
      throw FeatureShapeError(declared + " but the checksummed payload holds " +
                              std::to_string(size - kHeaderBytes - 4) + " bytes");
    }
    if (expected > size) {
      throw ParseError(size, "truncated: " + declared + " which needs more bytes than the file has");
    }
    throw ParseError(static_cast<std::size_t>(expected), "unexpected trailing bytes after the checksum");
  }
  const auto stored = static_cast<std::uint32_t>(read_le(bytes, size - 4, 4));
  const auto actual = crc32(bytes.first(size - 4));
  if (stored != actual) throw ChecksumError("crc32 mismatch: stored " + hex32(stored) + ", computed " + hex32(actual));

  BimodalDataset d;
  d.image = Tensor({n, n_i, c});
  d.speech = Tensor({n, n_s, c});
  d.labels.resize(n);
  std::size_t off = kHeaderBytes;
  for (std::size_t i = 0; i < n; ++i, ++off) {
    const auto y = bytes[off];
    if (y > 1) throw ParseError(off, "label must be 0 or 1");
    d.labels[i] = y;
  }
  for (double& v : d.image.data()) {
    v = std::bit_cast<double>(read_le(bytes, off, 8));
    off += 8;
  }
  for (double& v : d.speech.data()) {
    v = std::bit_cast<double>(read_le(bytes, off, 8));
    off += 8;
  }
  d.provenance = "file:" + std::string(source) + ":crc32=" + hex32(stored);
  return d;
}

void save_features(const BimodalDataset& data, const std::filesystem::path& path) {
  const auto bytes = encode_features(data);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

BimodalDataset load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_features(bytes, path.string());
}

std::string label_manifest_csv(std::span<const BimodalDataset* const> splits) {
  std::ostringstream os;
  os << "index,split,label,feature_hash\n";
  for (const auto* d : splits) {
    for (std::size_t i = 0; i < d->size(); ++i) {
      char hash[17];
      std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(d->sample_hash(i)));
      const std::uint64_t index = d->sample_ids.empty() ? i : d->sample_ids[i];
      os << index << ',' << to_string(d->split) << ',' << d->labels[i] << ',' << hash << '\n';
    }
  }
  return os.str();
}

}  // namespace stgsnas
