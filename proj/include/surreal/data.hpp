#pragma once

// Tensor file format, synthetic datasets, and dataset transforms.
//
// File format (extension .cplx): the ASCII magic "CPLX1", a dtype byte
// (0 = complex, 1 = real), a rank byte (at most 8), rank little-endian u64
// extents, then the payload of little-endian f64 values in row-major order;
// complex payloads interleave (re, im) pairs. Malformed input raises
// CplxFormatError carrying the byte offset of the violation.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "surreal/field.hpp"
#include "surreal/manifold.hpp"

namespace surreal {

struct RealTensor {
  std::vector<std::size_t> extents;
  std::vector<double> values;  // row-major
};

struct ComplexTensor {
  std::vector<std::size_t> extents;
  std::vector<std::complex<double>> values;  // row-major
};

class CplxFormatError : public std::runtime_error {
 public:
  CplxFormatError(const std::string& msg, std::uint64_t offset)
      : std::runtime_error(msg + " (byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

void save_cplx(const std::string& path, const ComplexTensor& t);
void save_cplx(const std::string& path, const RealTensor& t);

using LoadedTensor = std::variant<ComplexTensor, RealTensor>;
LoadedTensor load_cplx(const std::string& path);
LoadedTensor decode_cplx(const std::vector<unsigned char>& bytes);
ComplexTensor load_cplx_complex(const std::string& path);
RealTensor load_cplx_real(const std::string& path);

/// Field -> cartesian tensor with the same extents.
ComplexTensor field_to_tensor(const ComplexField& f);

/// Tensor -> field. Rank 1 becomes a single-channel signal; rank 2 and 3
/// read extents[0] as the channel count.
ComplexField tensor_to_field(const ComplexTensor& t, double eps = kMagnitudeFloor);

/// Two-plane real flattening for the baseline network: all real parts in
/// channel-major order, then all imaginary parts.
std::vector<double> flatten_cartesian(const ComplexField& f);

struct LabeledSample {
  ComplexField field;
  std::size_t label = 0;
};

enum class SynthMode { kPhase, kMagnitude, kMixed };

SynthMode synth_mode_from_string(const std::string& s);
std::string to_string(SynthMode m);

struct SynthSpec {
  SynthMode mode = SynthMode::kPhase;
  std::size_t classes = 4;
  std::vector<std::size_t> extents = {16, 16};  // spatial, rank 1 or 2
  std::size_t per_class = 50;
  double sigma = 0.3;
  std::uint64_t seed = 0;
};

/// Class-conditional samples. Phase patterns are plane waves on the unit
/// circle (|z| = 1 exactly): in 2-D each class owns an angular sector of the
/// integer frequency lattice and every sample draws its own wave vector,
/// global phase, and time-reversal flip, so absolute phase and any single
/// pixel carry no class information; in 1-D classes are frequency bands.
/// Magnitude patterns are fixed log-magnitude gratings with zero phase.
/// Mixed combines both. Each sample is generated from its own RNG seeded by
/// (seed, class, index), so subsets are reproducible.
std::vector<LabeledSample> synth_generate(const SynthSpec& spec);

/// Seeded random split into (train, test) with the given train fraction.
std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split_dataset(
    const std::vector<LabeledSample>& all, double train_fraction, std::uint64_t seed);

/// Applies one group element to every point of every sample.
std::vector<LabeledSample> apply_global_scaling(const std::vector<LabeledSample>& data,
                                                const GroupElement& g);

/// Keeps a seeded random fraction ratios[c] of each class c.
std::vector<LabeledSample> make_imbalanced(const std::vector<LabeledSample>& data,
                                           const std::vector<double>& ratios,
                                           std::uint64_t seed);

/// Writes sample_%05zu.cplx files plus manifest.csv ("file,label" header)
/// into dir. Returns the manifest path.
std::string save_dataset(const std::vector<LabeledSample>& data, const std::string& dir);

/// Reads a manifest and the sample files next to it.
std::vector<LabeledSample> load_manifest(const std::string& manifest_path);

}  // namespace surreal
