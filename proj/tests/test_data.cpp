#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "surreal/data.hpp"

using namespace surreal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("surreal_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const char* name) const { return (path / name).string(); }
};

bool same_points(const std::vector<PolarComplex>& a,
                 const std::vector<PolarComplex>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].log_r != b[i].log_r || a[i].theta != b[i].theta) return false;
  }
  return true;
}

void push_u64(std::vector<unsigned char>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void push_f64(std::vector<unsigned char>& b, double v) {
  unsigned char raw[8];
  std::memcpy(raw, &v, 8);
  b.insert(b.end(), raw, raw + 8);
}

// the reference encoding, written out by hand
std::vector<unsigned char> reference_bytes() {
  std::vector<unsigned char> b{'C', 'P', 'L', 'X', '1'};
  b.push_back(0);  // complex dtype
  b.push_back(1);  // rank
  push_u64(b, 2);
  push_f64(b, 1.0);
  push_f64(b, 2.0);
  push_f64(b, 3.0);
  push_f64(b, -4.0);
  return b;
}

}  // namespace

TEST_CASE("decoder accepts the hand-written reference encoding") {
  const auto t = std::get<ComplexTensor>(decode_cplx(reference_bytes()));
  REQUIRE(t.extents == std::vector<std::size_t>{2});
  REQUIRE(t.values.size() == 2);
  CHECK(t.values[0] == std::complex<double>(1.0, 2.0));
  CHECK(t.values[1] == std::complex<double>(3.0, -4.0));
}

TEST_CASE("encoder produces the reference bytes") {
  TempDir tmp;
  ComplexTensor t;
  t.extents = {2};
  t.values = {{1.0, 2.0}, {3.0, -4.0}};
  save_cplx(tmp.file("ref.cplx"), t);
  std::ifstream in(tmp.file("ref.cplx"), std::ios::binary);
  std::vector<unsigned char> got((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  CHECK(got == reference_bytes());
}

TEST_CASE("tensors of every rank round trip bit for bit") {
  TempDir tmp;
  std::mt19937_64 rng(801);
  std::uniform_real_distribution<double> val(-100.0, 100.0);
  const std::vector<std::vector<std::size_t>> shapes{
      {7}, {3, 4}, {2, 3, 2}, {1, 1}, {5, 1, 3}};
  for (const auto& e : shapes) {
    std::size_t n = 1;
    for (auto x : e) n *= x;

    ComplexTensor c;
    c.extents = e;
    for (std::size_t i = 0; i < n; ++i) c.values.emplace_back(val(rng), val(rng));
    save_cplx(tmp.file("c.cplx"), c);
    const ComplexTensor cc = load_cplx_complex(tmp.file("c.cplx"));
    CHECK(cc.extents == c.extents);
    CHECK(cc.values == c.values);

    RealTensor r;
    r.extents = e;
    for (std::size_t i = 0; i < n; ++i) r.values.push_back(val(rng));
    save_cplx(tmp.file("r.cplx"), r);
    const RealTensor rr = load_cplx_real(tmp.file("r.cplx"));
    CHECK(rr.extents == r.extents);
    CHECK(rr.values == r.values);
  }
}

TEST_CASE("malformed encodings are rejected with the right byte offset") {
  const auto offset_of = [](std::vector<unsigned char> bytes) -> std::int64_t {
    try {
      decode_cplx(bytes);
    } catch (const CplxFormatError& e) {
      return static_cast<std::int64_t>(e.offset());
    }
    return -1;
  };

  auto bad_magic = reference_bytes();
  bad_magic[0] = 'X';
  CHECK(offset_of(bad_magic) == 0);

  auto bad_dtype = reference_bytes();
  bad_dtype[5] = 9;
  CHECK(offset_of(bad_dtype) == 5);

  auto bad_rank = reference_bytes();
  bad_rank[6] = 9;
  CHECK(offset_of(bad_rank) == 6);

  auto truncated_extent = reference_bytes();
  truncated_extent.resize(10);  // extent u64 cut short
  CHECK(offset_of(truncated_extent) == 7);

  auto truncated_payload = reference_bytes();
  truncated_payload.resize(truncated_payload.size() - 3);
  CHECK(offset_of(truncated_payload) == 39);  // first f64 that cannot be read

  auto trailing = reference_bytes();
  trailing.push_back(0);
  CHECK(offset_of(trailing) == static_cast<std::int64_t>(reference_bytes().size()));

  // a real-typed file is not a complex tensor
  TempDir tmp;
  RealTensor r;
  r.extents = {1};
  r.values = {0.5};
  save_cplx(tmp.file("r.cplx"), r);
  CHECK_THROWS(load_cplx_complex(tmp.file("r.cplx")));
  CHECK_THROWS(load_cplx("/nonexistent/file.cplx"));
}

TEST_CASE("field and tensor views convert both ways") {
  std::mt19937_64 rng(802);
  std::uniform_real_distribution<double> lr(-2.0, 2.0);
  std::uniform_real_distribution<double> th(-kPi, kPi);
  ComplexField f = make_field({2, 3, 4});
  for (auto& p : f.data) p = make_polar(lr(rng), th(rng));

  const ComplexTensor t = field_to_tensor(f);
  CHECK(t.extents == f.shape);
  const ComplexField back = tensor_to_field(t);
  REQUIRE(back.shape == f.shape);
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    CHECK(back.data[i].log_r == doctest::Approx(f.data[i].log_r).epsilon(1e-12));
    CHECK(std::abs(wrap_angle(back.data[i].theta - f.data[i].theta)) < 1e-12);
  }

  // rank 1 tensors become one-channel signals
  ComplexTensor line;
  line.extents = {5};
  line.values.assign(5, {1.0, 0.0});
  CHECK(tensor_to_field(line).shape == std::vector<std::size_t>{1, 5});
}

TEST_CASE("baseline flattening puts real parts first") {
  ComplexField f = make_field({1, 2});
  f.data = {{0.0, 0.0}, {0.0, kPi / 2.0}};  // 1 and i
  const std::vector<double> flat = flatten_cartesian(f);
  REQUIRE(flat.size() == 4);
  CHECK(flat[0] == doctest::Approx(1.0));
  CHECK(flat[1] == doctest::Approx(0.0));
  CHECK(flat[2] == doctest::Approx(0.0).scale(1.0));
  CHECK(flat[3] == doctest::Approx(1.0));
}

TEST_CASE("phase samples sit exactly on the unit circle") {
  SynthSpec spec;
  spec.mode = SynthMode::kPhase;
  spec.classes = 2;
  spec.extents = {8, 8};
  spec.per_class = 5;
  spec.sigma = 0.4;
  spec.seed = 21;
  const auto data = synth_generate(spec);
  REQUIRE(data.size() == 10);
  for (const auto& s : data) {
    CHECK(s.field.shape == std::vector<std::size_t>{1, 8, 8});
    for (const auto& p : s.field.data) CHECK(p.log_r == 0.0);
  }
  // labels arrive grouped by class
  CHECK(data[0].label == 0);
  CHECK(data[4].label == 0);
  CHECK(data[5].label == 1);
  CHECK(data[9].label == 1);
}

TEST_CASE("generation is a pure function of the spec") {
  SynthSpec spec;
  spec.classes = 3;
  spec.extents = {6, 6};
  spec.per_class = 4;
  spec.seed = 5;
  const auto a = synth_generate(spec);
  const auto b = synth_generate(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(same_points(a[i].field.data, b[i].field.data));
  }
  spec.seed = 6;
  const auto c = synth_generate(spec);
  bool all_same = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_same = all_same && same_points(a[i].field.data, c[i].field.data);
  }
  CHECK_FALSE(all_same);
}

TEST_CASE("noise-free phase samples are integer lattice waves in class sectors") {
  SynthSpec spec;
  spec.mode = SynthMode::kPhase;
  spec.classes = 2;
  spec.extents = {16, 16};
  spec.per_class = 10;
  spec.sigma = 0.0;
  spec.seed = 99;
  const auto data = synth_generate(spec);
  std::set<std::pair<long, long>> seen;
  for (const auto& s : data) {
    const auto& f = s.field;
    const auto theta = [&](std::size_t x, std::size_t y) {
      return f.data[y * 16 + x].theta;
    };
    // constant first differences along both axes
    const double dx = wrap_angle(theta(1, 0) - theta(0, 0));
    const double dy = wrap_angle(theta(0, 1) - theta(0, 0));
    for (std::size_t y = 0; y + 1 < 16; ++y) {
      for (std::size_t x = 0; x + 1 < 16; ++x) {
        CHECK(std::abs(wrap_angle(theta(x + 1, y) - theta(x, y)) - dx) < 1e-9);
        CHECK(std::abs(wrap_angle(theta(x, y + 1) - theta(x, y)) - dy) < 1e-9);
      }
    }
    // whole cycles along each axis (the sample mean vanishes)
    const double nx = dx * 16.0 / kTwoPi;
    const double ny = dy * 16.0 / kTwoPi;
    CHECK(std::abs(nx - std::round(nx)) < 1e-6);
    CHECK(std::abs(ny - std::round(ny)) < 1e-6);
    long ix = std::lround(nx), iy = std::lround(ny);
    if (iy < 0 || (iy == 0 && ix < 0)) {
      ix = -ix;
      iy = -iy;
    }
    // radius band and class sector (angles mod pi)
    const double r = std::hypot(static_cast<double>(ix), static_cast<double>(iy));
    CHECK(r >= 1.0);
    CHECK(r <= 5.0 + 1e-9);
    const double ang =
        std::atan2(static_cast<double>(iy), static_cast<double>(ix));
    const double sector = kPi / 2.0;
    const double lo = sector * (static_cast<double>(s.label) + 0.05);
    const double hi = sector * (static_cast<double>(s.label) + 0.95);
    CHECK(ang >= lo - 1e-9);
    CHECK(ang <= hi + 1e-9);
    if (s.label == 0) seen.insert({ix, iy});
  }
  // the wave vector is a within-class nuisance, not a constant
  CHECK(seen.size() >= 2);
}

TEST_CASE("magnitude mode is a fixed grating with zero phase") {
  SynthSpec spec;
  spec.mode = SynthMode::kMagnitude;
  spec.classes = 2;
  spec.extents = {6, 6};
  spec.per_class = 3;
  spec.sigma = 0.0;
  spec.seed = 4;
  const auto data = synth_generate(spec);
  for (const auto& s : data) {
    for (const auto& p : s.field.data) {
      CHECK(p.theta == 0.0);
      CHECK(std::abs(p.log_r) <= 1.0 + 1e-12);
    }
  }
  // deterministic template per class when sigma is zero
  CHECK(same_points(data[0].field.data, data[1].field.data));
  CHECK_FALSE(same_points(data[0].field.data, data[3].field.data));

  spec.mode = SynthMode::kMixed;
  spec.sigma = 0.1;
  const auto mixed = synth_generate(spec);
  bool phase_varies = false, mag_varies = false;
  for (const auto& p : mixed[0].field.data) {
    phase_varies = phase_varies || std::abs(p.theta) > 1e-9;
    mag_varies = mag_varies || std::abs(p.log_r) > 1e-9;
  }
  CHECK(phase_varies);
  CHECK(mag_varies);
}

TEST_CASE("1-D phase classes occupy their frequency bands") {
  SynthSpec spec;
  spec.mode = SynthMode::kPhase;
  spec.classes = 3;
  spec.extents = {32};
  spec.per_class = 6;
  spec.sigma = 0.0;
  spec.seed = 17;
  const auto data = synth_generate(spec);
  for (const auto& s : data) {
    const double d = wrap_angle(s.field.data[1].theta - s.field.data[0].theta);
    const double cycles = std::abs(d) * 32.0 / kTwoPi;
    const double center = static_cast<double>(s.label + 1);
    CHECK(std::abs(cycles - center) <= 0.3 + 1e-9);
  }
}

TEST_CASE("splits conserve the dataset") {
  SynthSpec spec;
  spec.classes = 2;
  spec.extents = {4, 4};
  spec.per_class = 20;
  spec.seed = 3;
  const auto all = synth_generate(spec);
  const auto [train, test] = split_dataset(all, 0.25, 77);
  CHECK(train.size() == 10);
  CHECK(test.size() == 30);

  // fingerprint by first phase; the union must be the original multiset
  std::vector<double> got;
  for (const auto& s : train) got.push_back(s.field.data[0].theta);
  for (const auto& s : test) got.push_back(s.field.data[0].theta);
  std::vector<double> want;
  for (const auto& s : all) want.push_back(s.field.data[0].theta);
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  CHECK(got == want);

  // seeded: identical reruns, different shuffles for different seeds
  const auto again = split_dataset(all, 0.25, 77);
  CHECK(again.first.size() == train.size());
  bool same = true;
  for (std::size_t i = 0; i < train.size(); ++i) {
    same = same && same_points(again.first[i].field.data, train[i].field.data);
  }
  CHECK(same);

  CHECK(split_dataset(all, 0.0, 1).first.empty());
  CHECK(split_dataset(all, 1.0, 1).second.empty());
  CHECK_THROWS_AS(split_dataset(all, 1.5, 1), std::invalid_argument);
}

TEST_CASE("global scaling shifts every point by the same element") {
  SynthSpec spec;
  spec.classes = 2;
  spec.extents = {4};
  spec.per_class = 2;
  spec.seed = 9;
  const auto data = synth_generate(spec);
  const GroupElement g{std::log(2.0), 0.5};
  const auto moved = apply_global_scaling(data, g);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(moved[i].label == data[i].label);
    for (std::size_t j = 0; j < data[i].field.data.size(); ++j) {
      const auto& a = data[i].field.data[j];
      const auto& b = moved[i].field.data[j];
      CHECK(b.log_r == doctest::Approx(a.log_r + std::log(2.0)));
      CHECK(std::abs(wrap_angle(b.theta - (a.theta + 0.5))) < 1e-12);
    }
  }
}

TEST_CASE("imbalance keeps a seeded fraction of each class in order") {
  SynthSpec spec;
  spec.classes = 2;
  spec.extents = {4};
  spec.per_class = 20;
  spec.seed = 31;
  const auto data = synth_generate(spec);
  const auto cut = make_imbalanced(data, {1.0, 0.25}, 5);

  std::size_t c0 = 0, c1 = 0;
  for (const auto& s : cut) (s.label == 0 ? c0 : c1)++;
  CHECK(c0 == 20);
  CHECK(c1 == 5);

  // kept samples preserve their original relative order
  std::vector<double> orig, kept;
  for (const auto& s : data) {
    if (s.label == 1) orig.push_back(s.field.data[0].theta);
  }
  for (const auto& s : cut) {
    if (s.label == 1) kept.push_back(s.field.data[0].theta);
  }
  std::size_t pos = 0;
  for (double v : kept) {
    while (pos < orig.size() && orig[pos] != v) ++pos;
    CHECK(pos < orig.size());
  }

  // a tiny ratio still keeps at least one sample
  const auto tiny = make_imbalanced(data, {1.0, 0.001}, 5);
  std::size_t tiny_c1 = 0;
  for (const auto& s : tiny) tiny_c1 += s.label == 1 ? 1 : 0;
  CHECK(tiny_c1 == 1);

  CHECK_THROWS_AS(make_imbalanced(data, {1.0}, 5), std::invalid_argument);
}

TEST_CASE("datasets round trip through manifest files") {
  TempDir tmp;
  SynthSpec spec;
  spec.classes = 2;
  spec.extents = {4, 4};
  spec.per_class = 3;
  spec.sigma = 0.2;
  spec.seed = 13;
  const auto data = synth_generate(spec);
  const std::string manifest = save_dataset(data, tmp.path.string());
  CHECK(fs::exists(manifest));
  CHECK(fs::exists(tmp.path / "sample_00000.cplx"));
  CHECK(fs::exists(tmp.path / "sample_00005.cplx"));

  std::ifstream in(manifest);
  std::string header;
  std::getline(in, header);
  CHECK(header == "file,label");

  const auto back = load_manifest(manifest);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].label == data[i].label);
    REQUIRE(back[i].field.shape == data[i].field.shape);
    for (std::size_t j = 0; j < data[i].field.data.size(); ++j) {
      CHECK(std::abs(back[i].field.data[j].log_r - data[i].field.data[j].log_r) <
            1e-12);
      CHECK(std::abs(wrap_angle(back[i].field.data[j].theta -
                                data[i].field.data[j].theta)) < 1e-12);
    }
  }

  // refuse a manifest without the header line
  std::ofstream bad(tmp.file("bad.csv"));
  bad << "sample_00000.cplx,0\n";
  bad.close();
  CHECK_THROWS(load_manifest(tmp.file("bad.csv")));
}
