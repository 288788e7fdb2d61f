#include "surreal/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "surreal/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "tensor codec assumes a little-endian host");
static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559,
              "tensor codec assumes IEEE-754 binary64");

namespace surreal {

namespace {

constexpr char kMagic[5] = {'C', 'P', 'L', 'X', '1'};
constexpr std::uint8_t kDtypeComplex = 0;
constexpr std::uint8_t kDtypeReal = 1;
constexpr std::uint8_t kMaxRank = 8;

void append_bytes(std::vector<unsigned char>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  out.insert(out.end(), b, b + n);
}

std::size_t checked_numel(const std::vector<std::size_t>& extents,
                          std::uint64_t offset_for_error) {
  std::size_t n = 1;
  for (std::size_t e : extents) {
    if (e != 0 && n > std::numeric_limits<std::size_t>::max() / e) {
      throw CplxFormatError("extent product overflows", offset_for_error);
    }
    n *= e;
  }
  return n;
}

std::vector<unsigned char> encode_header(std::uint8_t dtype,
                                         const std::vector<std::size_t>& extents) {
  if (extents.size() > kMaxRank) {
    throw std::invalid_argument("save: rank exceeds " + std::to_string(kMaxRank));
  }
  std::vector<unsigned char> out;
  append_bytes(out, kMagic, sizeof(kMagic));
  out.push_back(dtype);
  out.push_back(static_cast<unsigned char>(extents.size()));
  for (std::size_t e : extents) {
    const std::uint64_t v = e;
    append_bytes(out, &v, sizeof(v));
  }
  return out;
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

struct Cursor {
  const std::vector<unsigned char>& bytes;
  std::uint64_t off = 0;

  void need(std::uint64_t n, const char* what) const {
    if (bytes.size() - off < n) {
      throw CplxFormatError(std::string("truncated ") + what, off);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes[off++];
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    std::memcpy(&v, bytes.data() + off, 8);
    off += 8;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    double v = 0;
    std::memcpy(&v, bytes.data() + off, 8);
    off += 8;
    return v;
  }
};

}  // namespace

void save_cplx(const std::string& path, const ComplexTensor& t) {
  const std::size_t n = checked_numel(t.extents, 0);
  if (t.values.size() != n) {
    throw std::invalid_argument("save: value count does not match extents");
  }
  std::vector<unsigned char> bytes = encode_header(kDtypeComplex, t.extents);
  bytes.reserve(bytes.size() + 16 * n);
  for (const auto& z : t.values) {
    const double re = z.real(), im = z.imag();
    append_bytes(bytes, &re, 8);
    append_bytes(bytes, &im, 8);
  }
  write_file(path, bytes);
}

void save_cplx(const std::string& path, const RealTensor& t) {
  const std::size_t n = checked_numel(t.extents, 0);
  if (t.values.size() != n) {
    throw std::invalid_argument("save: value count does not match extents");
  }
  std::vector<unsigned char> bytes = encode_header(kDtypeReal, t.extents);
  bytes.reserve(bytes.size() + 8 * n);
  for (double v : t.values) append_bytes(bytes, &v, 8);
  write_file(path, bytes);
}

LoadedTensor decode_cplx(const std::vector<unsigned char>& bytes) {
  Cursor cur{bytes};
  cur.need(sizeof(kMagic), "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CplxFormatError("bad magic", 0);
  }
  cur.off = sizeof(kMagic);

  const std::uint64_t dtype_off = cur.off;
  const std::uint8_t dtype = cur.u8("dtype");
  if (dtype != kDtypeComplex && dtype != kDtypeReal) {
    throw CplxFormatError("unknown dtype " + std::to_string(dtype), dtype_off);
  }
  const std::uint64_t rank_off = cur.off;
  const std::uint8_t rank = cur.u8("rank");
  if (rank > kMaxRank) {
    throw CplxFormatError("rank " + std::to_string(rank) + " exceeds 8", rank_off);
  }

  std::vector<std::size_t> extents(rank);
  for (std::uint8_t i = 0; i < rank; ++i) {
    const std::uint64_t v = cur.u64("extents");
    if constexpr (sizeof(std::size_t) < sizeof(std::uint64_t)) {
      if (v > std::numeric_limits<std::size_t>::max()) {
        throw CplxFormatError("extent too large", cur.off - 8);
      }
    }
    extents[i] = static_cast<std::size_t>(v);
  }
  const std::size_t n = checked_numel(extents, cur.off);

  LoadedTensor result;
  if (dtype == kDtypeComplex) {
    ComplexTensor t;
    t.extents = std::move(extents);
    t.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double re = cur.f64("payload");
      const double im = cur.f64("payload");
      t.values.emplace_back(re, im);
    }
    result = std::move(t);
  } else {
    RealTensor t;
    t.extents = std::move(extents);
    t.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.values.push_back(cur.f64("payload"));
    result = std::move(t);
  }
  if (cur.off != bytes.size()) {
    throw CplxFormatError("trailing bytes after payload", cur.off);
  }
  return result;
}

LoadedTensor load_cplx(const std::string& path) { return decode_cplx(read_file(path)); }

ComplexTensor load_cplx_complex(const std::string& path) {
  LoadedTensor t = load_cplx(path);
  if (!std::holds_alternative<ComplexTensor>(t)) {
    throw std::runtime_error("expected complex dtype in " + path);
  }
  return std::get<ComplexTensor>(std::move(t));
}

RealTensor load_cplx_real(const std::string& path) {
  LoadedTensor t = load_cplx(path);
  if (!std::holds_alternative<RealTensor>(t)) {
    throw std::runtime_error("expected real dtype in " + path);
  }
  return std::get<RealTensor>(std::move(t));
}

ComplexTensor field_to_tensor(const ComplexField& f) {
  validate_field(f);
  ComplexTensor t;
  t.extents = f.shape;
  t.values.reserve(f.data.size());
  for (const auto& p : f.data) {
    const auto [re, im] = to_cartesian(p);
    t.values.emplace_back(re, im);
  }
  return t;
}

ComplexField tensor_to_field(const ComplexTensor& t, double eps) {
  ComplexField f;
  if (t.extents.size() == 1) {
    f.shape = {1, t.extents[0]};
  } else if (t.extents.size() == 2 || t.extents.size() == 3) {
    f.shape = t.extents;
  } else {
    throw std::invalid_argument("tensor rank " + std::to_string(t.extents.size()) +
                                " not convertible to a field");
  }
  f.data.reserve(t.values.size());
  for (const auto& z : t.values) {
    f.data.push_back(from_cartesian(z.real(), z.imag(), eps));
  }
  validate_field(f);
  return f;
}

std::vector<double> flatten_cartesian(const ComplexField& f) {
  validate_field(f);
  std::vector<double> out;
  out.reserve(2 * f.data.size());
  for (const auto& p : f.data) out.push_back(to_cartesian(p).first);
  for (const auto& p : f.data) out.push_back(to_cartesian(p).second);
  return out;
}

SynthMode synth_mode_from_string(const std::string& s) {
  if (s == "phase") return SynthMode::kPhase;
  if (s == "magnitude") return SynthMode::kMagnitude;
  if (s == "mixed") return SynthMode::kMixed;
  throw std::invalid_argument("unknown synth mode: " + s);
}

std::string to_string(SynthMode m) {
  switch (m) {
    case SynthMode::kPhase: return "phase";
    case SynthMode::kMagnitude: return "magnitude";
    case SynthMode::kMixed: return "mixed";
  }
  return "?";
}

namespace {

// Phase classes are plane-wave populations, not fixed templates: every sample
// draws its own wave direction inside the class sector (2-D) or frequency
// inside the class band (1-D), its own frequency jitter, and its own global
// phase. No pixel's absolute phase carries label information, and no small
// sample set tiles the within-class family, so only the relative phase
// structure separates the classes.
struct Wave {
  double kx = 0.0;  // phase advance across the full x extent
  double ky = 0.0;
  double offset = 0.0;
};

Wave draw_wave(const SynthSpec& spec, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Wave wv;
  wv.offset = kPi * uni(rng);  // draw order: offset, wave vector, flip
  if (spec.extents.size() == 1) {
    // frequency bands: class c spans (c + 1) +- 0.3 cycles
    wv.kx = kTwoPi * (static_cast<double>(c + 1) + 0.3 * uni(rng));
  } else {
    // Each class owns an angular sector of the integer frequency lattice,
    // sectors tiling the half circle (a wave and its reverse carry
    // mirror-image phase structure, so angles are taken mod pi). Whole
    // cycles along both axes keep every sample mean-free, and the radius
    // band scales with the short extent so the per-pixel phase step stays
    // in a fixed range. Which lattice point a sample gets is pure nuisance.
    const double span = static_cast<double>(
        *std::min_element(spec.extents.begin(), spec.extents.end()));
    const long r_hi = std::max<long>(2, std::lround(0.30 * span));
    const long r_lo = std::min<long>(r_hi, std::max<long>(1, std::lround(0.06 * span)));
    const double sector = kPi / static_cast<double>(spec.classes);
    const double lo = sector * (static_cast<double>(c) + 0.05);
    const double hi = sector * (static_cast<double>(c) + 0.95);
    std::uniform_int_distribution<long> xs(-r_hi, r_hi);
    std::uniform_int_distribution<long> ys(0, r_hi);
    for (std::size_t tries = 0;; ++tries) {
      if (tries > 100000) {
        throw std::runtime_error(
            "synth: no admissible wave vector for this class; "
            "use larger extents or fewer classes");
      }
      const long nx = xs(rng);
      const long ny = ys(rng);
      const double r2 = static_cast<double>(nx * nx + ny * ny);
      if (r2 < static_cast<double>(r_lo * r_lo) ||
          r2 > static_cast<double>(r_hi * r_hi)) {
        continue;
      }
      double ang = std::atan2(static_cast<double>(ny), static_cast<double>(nx));
      if (ny == 0 && nx < 0) ang = 0.0;  // (-n, 0) is (n, 0) mod pi
      if (ang < lo || ang >= hi) continue;
      wv.kx = kTwoPi * static_cast<double>(nx);
      wv.ky = kTwoPi * static_cast<double>(ny);
      break;
    }
  }
  // a random half of each class is time-reversed; pairwise phase distances
  // cannot see the flip, a raw pixel view sees a second disjoint population
  if (uni(rng) < 0.0) {
    wv.kx = -wv.kx;
    wv.ky = -wv.ky;
    wv.offset = -wv.offset;
  }
  return wv;
}

double wave_phase(const Wave& wv, const SynthSpec& spec, std::size_t x,
                  std::size_t y) {
  const double u = static_cast<double>(x) / static_cast<double>(spec.extents.back());
  const double v = spec.extents.size() == 2
                       ? static_cast<double>(y) / static_cast<double>(spec.extents[0])
                       : 0.0;
  return wv.kx * u + wv.ky * v + wv.offset;
}

// Deterministic log-magnitude grating for class c; the magnitude task stays
// template-based so a flat real-valued model can also solve it.
double grating_phase(const SynthSpec& spec, std::size_t c, std::size_t x,
                     std::size_t y) {
  const double span = static_cast<double>(
      *std::max_element(spec.extents.begin(), spec.extents.end()));
  if (spec.extents.size() == 1) {
    const double cycles = static_cast<double>(c + 1);
    return kTwoPi * cycles * static_cast<double>(x) / span;
  }
  const double orient = kPi * static_cast<double>(c) / static_cast<double>(spec.classes);
  const double cycles = 1.0 + static_cast<double>(c / 4);
  const double u = std::cos(orient) * static_cast<double>(x) +
                   std::sin(orient) * static_cast<double>(y);
  return kTwoPi * cycles * u / span;
}

}  // namespace

std::vector<LabeledSample> synth_generate(const SynthSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("synth: need at least two classes");
  if (spec.extents.empty() || spec.extents.size() > 2) {
    throw std::invalid_argument("synth: extents must be rank 1 or 2");
  }
  if (spec.per_class == 0) throw std::invalid_argument("synth: per_class must be positive");
  if (!(spec.sigma >= 0.0)) throw std::invalid_argument("synth: sigma must be nonnegative");

  const std::size_t h = spec.extents.size() == 2 ? spec.extents[0] : 1;
  const std::size_t w = spec.extents.back();
  const bool has_phase = spec.mode != SynthMode::kMagnitude;
  const bool has_mag = spec.mode != SynthMode::kPhase;

  std::vector<std::size_t> shape{1};
  shape.insert(shape.end(), spec.extents.begin(), spec.extents.end());

  std::vector<LabeledSample> out;
  out.reserve(spec.classes * spec.per_class);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      // fixed draw order per sample: wave parameters first, then per-pixel
      // noise row-major (phase before magnitude at each pixel)
      std::mt19937_64 rng(mix_seed(spec.seed, c, i));
      std::normal_distribution<double> gauss(0.0, spec.sigma > 0.0 ? spec.sigma : 1e-300);

      const Wave wv = has_phase ? draw_wave(spec, c, rng) : Wave{};
      LabeledSample s;
      s.label = c;
      s.field.shape = shape;
      s.field.data.reserve(h * w);
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          double theta = 0.0;
          double log_r = 0.0;
          if (has_phase) {
            const double noise = spec.sigma > 0.0 ? gauss(rng) : 0.0;
            theta = wrap_angle(wave_phase(wv, spec, x, y) + noise);
          }
          if (has_mag) {
            const double noise = spec.sigma > 0.0 ? gauss(rng) : 0.0;
            log_r = std::cos(grating_phase(spec, c, x, y)) + noise;
          }
          s.field.data.push_back(PolarComplex{log_r, theta});
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split_dataset(
    const std::vector<LabeledSample>& all, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw std::invalid_argument("split: train fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto train_n = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(all.size())));
  std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> out;
  out.first.reserve(train_n);
  out.second.reserve(all.size() - train_n);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < train_n ? out.first : out.second).push_back(all[idx[i]]);
  }
  return out;
}

std::vector<LabeledSample> apply_global_scaling(const std::vector<LabeledSample>& data,
                                                const GroupElement& g) {
  std::vector<LabeledSample> out = data;
  for (auto& s : out) {
    for (auto& p : s.field.data) p = act(g, p);
  }
  return out;
}

std::vector<LabeledSample> make_imbalanced(const std::vector<LabeledSample>& data,
                                           const std::vector<double>& ratios,
                                           std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw std::invalid_argument("make_imbalanced: ratios must lie in (0, 1]");
    }
  }
  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t c = data[i].label;
    if (c >= ratios.size()) {
      throw std::invalid_argument("make_imbalanced: label " + std::to_string(c) +
                                  " has no ratio");
    }
    if (c >= by_class.size()) by_class.resize(c + 1);
    by_class[c].push_back(i);
  }
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    std::mt19937_64 rng(mix_seed(seed, c));
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t k = static_cast<std::size_t>(
        std::llround(ratios[c] * static_cast<double>(members.size())));
    if (k == 0 && !members.empty()) k = 1;
    keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
  }
  std::sort(keep.begin(), keep.end());
  std::vector<LabeledSample> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(data[i]);
  return out;
}

std::string save_dataset(const std::vector<LabeledSample>& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::string manifest_path = (fs::path(dir) / "manifest.csv").string();
  std::ofstream manifest(manifest_path, std::ios::trunc);
  if (!manifest) throw std::runtime_error("cannot write manifest: " + manifest_path);
  manifest << "file,label\n";
  char name[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(name, sizeof(name), "sample_%05zu.cplx", i);
    save_cplx((fs::path(dir) / name).string(), field_to_tensor(data[i].field));
    manifest << name << ',' << data[i].label << '\n';
  }
  if (!manifest) throw std::runtime_error("manifest write failed: " + manifest_path);
  return manifest_path;
}

std::vector<LabeledSample> load_manifest(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();
  std::string line;
  if (!std::getline(in, line) || line != "file,label") {
    throw std::runtime_error("manifest missing 'file,label' header: " + manifest_path);
  }
  std::vector<LabeledSample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": expected file,label");
    }
    LabeledSample s;
    try {
      s.label = static_cast<std::size_t>(std::stoull(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) + ": bad label");
    }
    s.field = tensor_to_field(load_cplx_complex((dir / line.substr(0, comma)).string()));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace surreal
