#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rblu/error.hpp"
#include "rblu/metrics.hpp"
#include "rblu/rblu_sampler.hpp"
#include "rblu/synth.hpp"
#include "rblu/types.hpp"

// Binary formats (all integers and floats little-endian):
//
//   Cube ("HSC v1"):   "HSCUBE01" | u32 H | u32 W | u32 L | H*W*L f64
//                      band-major: band l contiguous, pixels row-major.
//   Sections:          "HSCSEC01" | u32 H | u32 W | u32 L | u32 count |
//                      count x ( 4-byte ASCII tag | u32 rows | u32 cols |
//                      rows*cols f64, row-major )
//
// Truth sidecars and run summaries are section files.

namespace rblu::io {

inline constexpr std::array<char, 8> kCubeMagic{'H', 'S', 'C', 'U', 'B', 'E', '0', '1'};
inline constexpr std::array<char, 8> kSectionMagic{'H', 'S', 'C', 'S', 'E', 'C', '0', '1'};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated file while reading " + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
    return v;
}

inline double get_f64(std::istream& is, const std::string& what) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated file while reading " + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return std::bit_cast<double>(v);
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path.string() + "' for reading");
    return is;
}

inline void check_magic(std::istream& is, const std::array<char, 8>& magic, const std::string& path) {
    std::array<char, 8> got{};
    if (!is.read(got.data(), 8) || got != magic)
        throw DataError("'" + path + "' does not start with " + std::string(magic.data(), 8));
}

inline void finish(std::ofstream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) throw DataError("write to '" + path.string() + "' failed");
}

}  // namespace detail

inline void write_cube(const std::filesystem::path& path, const HsiCube& cube) {
    auto os = detail::open_out(path);
    os.write(kCubeMagic.data(), 8);
    detail::put_u32(os, static_cast<std::uint32_t>(cube.height()));
    detail::put_u32(os, static_cast<std::uint32_t>(cube.width()));
    detail::put_u32(os, static_cast<std::uint32_t>(cube.bands()));
    const Matrix& d = cube.data();
    for (Eigen::Index l = 0; l < d.rows(); ++l)
        for (Eigen::Index n = 0; n < d.cols(); ++n) detail::put_f64(os, d(l, n));
    detail::finish(os, path);
}

inline HsiCube read_cube(const std::filesystem::path& path) {
    auto is = detail::open_in(path);
    detail::check_magic(is, kCubeMagic, path.string());
    const auto h = detail::get_u32(is, "height");
    const auto w = detail::get_u32(is, "width");
    const auto l = detail::get_u32(is, "bands");
    if (h == 0 || w == 0 || l == 0) throw DataError("'" + path.string() + "': zero dimension in header");
    const auto n = static_cast<std::uint64_t>(h) * w;
    if (n * l > (std::uint64_t{1} << 34)) throw DataError("'" + path.string() + "': implausibly large cube");
    Matrix d(l, static_cast<Eigen::Index>(n));
    for (Eigen::Index b = 0; b < d.rows(); ++b)
        for (Eigen::Index p = 0; p < d.cols(); ++p) d(b, p) = detail::get_f64(is, "cube data");
    if (is.peek() != std::char_traits<char>::eof()) throw DataError("'" + path.string() + "': trailing bytes");
    return HsiCube(static_cast<int>(h), static_cast<int>(w), std::move(d));
}

/// Ordered tagged matrices plus the cube geometry they belong to.
struct SectionFile {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t bands = 0;
    std::vector<std::pair<std::string, Matrix>> sections;

    void add(const std::string& tag, Matrix m) {
        if (tag.size() != 4) throw std::invalid_argument("section tags are exactly four characters: '" + tag + "'");
        sections.emplace_back(tag, std::move(m));
    }

    bool has(const std::string& tag) const {
        for (const auto& [t, m] : sections)
            if (t == tag) return true;
        return false;
    }

    const Matrix& get(const std::string& tag) const {
        for (const auto& [t, m] : sections)
            if (t == tag) return m;
        throw DataError("missing section '" + tag + "'");
    }
};

inline void write_sections(const std::filesystem::path& path, const SectionFile& f) {
    auto os = detail::open_out(path);
    os.write(kSectionMagic.data(), 8);
    detail::put_u32(os, f.height);
    detail::put_u32(os, f.width);
    detail::put_u32(os, f.bands);
    detail::put_u32(os, static_cast<std::uint32_t>(f.sections.size()));
    for (const auto& [tag, m] : f.sections) {
        os.write(tag.data(), 4);
        detail::put_u32(os, static_cast<std::uint32_t>(m.rows()));
        detail::put_u32(os, static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_f64(os, m(i, j));
    }
    detail::finish(os, path);
}

inline SectionFile read_sections(const std::filesystem::path& path) {
    auto is = detail::open_in(path);
    detail::check_magic(is, kSectionMagic, path.string());
    SectionFile f;
    f.height = detail::get_u32(is, "height");
    f.width = detail::get_u32(is, "width");
    f.bands = detail::get_u32(is, "bands");
    const auto count = detail::get_u32(is, "section count");
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string tag(4, '\0');
        if (!is.read(tag.data(), 4)) throw DataError("truncated section tag in '" + path.string() + "'");
        const auto rows = detail::get_u32(is, tag + " rows");
        const auto cols = detail::get_u32(is, tag + " cols");
        if (static_cast<std::uint64_t>(rows) * cols > (std::uint64_t{1} << 34))
            throw DataError("section '" + tag + "' is implausibly large");
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = detail::get_f64(is, tag);
        f.sections.emplace_back(std::move(tag), std::move(m));
    }
    return f;
}

inline Matrix labels_to_matrix(const LabelMatrix& z) { return z.cast<double>(); }

inline LabelMatrix matrix_to_labels(const Matrix& m, const std::string& what) {
    if (((m.array() != 0.0) && (m.array() != 1.0)).any()) throw DataError(what + ": labels must be 0 or 1");
    return m.cast<std::uint8_t>();
}

/// Endmember CSV: header `wavelength_index,m1,...,mR`, one row per band.
inline void write_endmember_csv(const std::filesystem::path& path, const Matrix& m) {
    auto os = detail::open_out(path);
    os << "wavelength_index";
    for (Eigen::Index r = 0; r < m.cols(); ++r) os << ",m" << (r + 1);
    os << '\n';
    char buf[32];
    for (Eigen::Index l = 0; l < m.rows(); ++l) {
        os << l;
        for (Eigen::Index r = 0; r < m.cols(); ++r) {
            std::snprintf(buf, sizeof buf, "%.17g", m(l, r));
            os << ',' << buf;
        }
        os << '\n';
    }
    detail::finish(os, path);
}

inline Matrix read_endmember_csv(const std::filesystem::path& path) {
    auto is = detail::open_in(path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("wavelength_index", 0) != 0)
        throw DataError("'" + path.string() + "': expected header starting with wavelength_index");
    const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
    if (cols < 1) throw DataError("'" + path.string() + "': no endmember columns");
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            double v = 0;
            const char* end = cell.data() + cell.size();
            if (!cell.empty() && cell.back() == '\r') --end;
            const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
            if (ec != std::errc() || ptr != end || !std::isfinite(v))
                throw DataError("'" + path.string() + "': bad number '" + cell + "'");
            row.push_back(v);
        }
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw DataError("'" + path.string() + "': ragged row " + std::to_string(rows.size() + 1));
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t l = 0; l < rows.size(); ++l)
        for (Eigen::Index r = 0; r < cols; ++r) m(static_cast<Eigen::Index>(l), r) = rows[l][r];
    return m;
}

/// A per-pixel map written as an H x W CSV grid.
inline void write_map_csv(const std::filesystem::path& path, const Vector& values, int height, int width) {
    rblu::detail::require_dims(values.size() == static_cast<Eigen::Index>(height) * width, "map",
                               "expected " + std::to_string(static_cast<long>(height) * width) + " pixels");
    auto os = detail::open_out(path);
    char buf[32];
    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            std::snprintf(buf, sizeof buf, "%.17g", values(row * width + col));
            if (col) os << ',';
            os << buf;
        }
        os << '\n';
    }
    detail::finish(os, path);
}

/// Linear min-max scaling applied to a map before quantisation.
struct MapScale {
    double min = 0;
    double max = 0;
    bool degenerate = false;  // constant map, written as uniform mid-grey
};

/// Binary PGM (P5), maxval 65535, row-major, big-endian samples.
inline MapScale write_pgm(const std::filesystem::path& path, const Vector& values, int height, int width) {
    rblu::detail::require_dims(values.size() == static_cast<Eigen::Index>(height) * width, "map",
                               "expected " + std::to_string(static_cast<long>(height) * width) + " pixels");
    MapScale scale{values.minCoeff(), values.maxCoeff(), false};
    scale.degenerate = !(scale.max > scale.min);
    auto os = detail::open_out(path);
    os << "P5\n" << width << ' ' << height << "\n65535\n";
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        std::uint16_t q = 32768;
        if (!scale.degenerate) {
            const double t = (values(i) - scale.min) / (scale.max - scale.min);
            q = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
        }
        const unsigned char b[2] = {static_cast<unsigned char>(q >> 8), static_cast<unsigned char>(q & 0xFF)};
        os.write(reinterpret_cast<const char*>(b), 2);
    }
    detail::finish(os, path);
    return scale;
}

/// Reads back a P5 image written by write_pgm: (width, height, samples).
struct PgmImage {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::vector<std::uint16_t> samples;
};

inline PgmImage read_pgm(const std::filesystem::path& path) {
    auto is = detail::open_in(path);
    std::string magic;
    PgmImage img;
    is >> magic >> img.width >> img.height >> img.maxval;
    if (magic != "P5" || !is || img.maxval != 65535) throw DataError("'" + path.string() + "': not a 16-bit P5 PGM");
    is.get();
    img.samples.resize(static_cast<std::size_t>(img.width) * img.height);
    for (auto& s : img.samples) {
        unsigned char b[2];
        if (!is.read(reinterpret_cast<char*>(b), 2)) throw DataError("'" + path.string() + "': truncated");
        s = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
    }
    return img;
}

/// key=value text file, keys kept in insertion order.
class KeyValueFile {
public:
    template <class T>
    void set(const std::string& key, const T& value) {
        std::ostringstream ss;
        if constexpr (std::is_floating_point_v<T>) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(value));
            ss << buf;
        } else {
            ss << value;
        }
        for (auto& [k, v] : entries_)
            if (k == key) {
                v = ss.str();
                return;
            }
        entries_.emplace_back(key, ss.str());
    }

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return v;
        throw DataError("missing key '" + key + "'");
    }

    bool has(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return true;
        return false;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    void write(const std::filesystem::path& path) const {
        auto os = detail::open_out(path);
        for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
        detail::finish(os, path);
    }

    static KeyValueFile read(const std::filesystem::path& path) {
        auto is = detail::open_in(path);
        KeyValueFile f;
        std::string line;
        while (std::getline(is, line)) {
            const auto eq = line.find('=');
            if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
            f.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        }
        return f;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Ground truth as a section file: ENDM (L x R), ABND (R x N), LABL and
/// OUTV (L x N), SIG2 (L x 1), OVAR (1 x 1), and NLMK (1 x N) for bilinear
/// images.
inline SectionFile truth_sections(const GroundTruth& t, int height, int width) {
    SectionFile f;
    f.height = static_cast<std::uint32_t>(height);
    f.width = static_cast<std::uint32_t>(width);
    f.bands = static_cast<std::uint32_t>(t.endmembers.rows());
    f.add("ENDM", t.endmembers);
    f.add("ABND", t.abundances);
    f.add("LABL", labels_to_matrix(t.labels));
    f.add("OUTV", t.outlier_values);
    f.add("SIG2", t.noise_var);
    f.add("OVAR", Matrix::Constant(1, 1, t.s2));
    if (t.nonlinear_mask) f.add("NLMK", labels_to_matrix(*t.nonlinear_mask));
    return f;
}

inline GroundTruth truth_from_sections(const SectionFile& f) {
    GroundTruth t;
    t.endmembers = f.get("ENDM");
    t.abundances = f.get("ABND");
    t.labels = matrix_to_labels(f.get("LABL"), "LABL");
    t.outlier_values = f.get("OUTV");
    t.noise_var = f.get("SIG2").col(0);
    t.s2 = f.get("OVAR")(0, 0);
    if (f.has("NLMK")) t.nonlinear_mask = matrix_to_labels(f.get("NLMK"), "NLMK");
    const auto n = static_cast<Eigen::Index>(f.height) * f.width;
    rblu::detail::require_dims(t.endmembers.rows() == f.bands && t.abundances.cols() == n &&
                                   t.abundances.rows() == t.endmembers.cols() && t.labels.rows() == f.bands &&
                                   t.labels.cols() == n && t.outlier_values.rows() == f.bands &&
                                   t.outlier_values.cols() == n && t.noise_var.size() == f.bands,
                               "truth", "sections disagree with the header geometry");
    return t;
}

/// Posterior summary as a section file: ENDM, ABND, LABL (MMAP), ROUT (R
/// estimate, L x N), ENRG (1 x N), BENR (L x 1), BETA (1 x 3), SIG2 (L x 1),
/// OVAR, RERR (1 x N, ||y - M a - r|| per pixel) and NRET (retained draws).
inline SectionFile summary_sections(const PosteriorSummary& s, const HsiCube& cube) {
    SectionFile f;
    f.height = static_cast<std::uint32_t>(cube.height());
    f.width = static_cast<std::uint32_t>(cube.width());
    f.bands = static_cast<std::uint32_t>(cube.bands());
    f.add("ENDM", s.endmembers);
    f.add("ABND", s.abundances);
    f.add("LABL", labels_to_matrix(s.labels.labels()));
    f.add("ROUT", s.outliers);
    f.add("ENRG", s.outlier_energy.transpose());
    f.add("BENR", s.band_outlier_energy);
    Matrix beta(1, 3);
    beta << s.beta.beta_N, s.beta.beta_L, s.beta.beta_0;
    f.add("BETA", beta);
    f.add("SIG2", s.noise_var_mean);
    f.add("OVAR", Matrix::Constant(1, 1, s.outlier_var_mean));
    f.add("RERR", reconstruction_error(cube, s.endmembers, s.abundances, s.outlier_field()).transpose());
    f.add("NRET", Matrix::Constant(1, 1, static_cast<double>(s.retained)));
    return f;
}

}  // namespace rblu::io
