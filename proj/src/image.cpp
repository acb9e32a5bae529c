#include "awdiff/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "awdiff/tensor_io.hpp"

namespace awdiff {

Image::Image(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0)
        throw ParameterError("image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height, 0.0);
}

Image::Image(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0)
        throw ParameterError("image dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height)
        throw InvariantError("pixel count does not match width*height");
    require_finite("image constructor");
}

bool Image::all_finite() const {
    for (double v : pixels_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Image::require_finite(const char* context) const {
    if (!all_finite())
        throw InvariantError(std::string(context) + ": non-finite pixel value");
}

// ---------------------------------------------------------------------------
// SeededRng
// ---------------------------------------------------------------------------

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

} // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_word_(seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

SeededRng SeededRng::from_state(const std::array<std::uint64_t, 4>& words) {
    SeededRng r;
    r.state_ = words;
    return r;
}

std::uint64_t SeededRng::next_u64() {
    // xoshiro256++
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double SeededRng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::next_normal() {
    // Marsaglia polar method. Only sqrt/log are involved, which keeps the
    // stream identical across platforms for a fixed seed.
    for (;;) {
        double u = 2.0 * next_uniform() - 1.0;
        double v = 2.0 * next_uniform() - 1.0;
        double s = u * u + v * v;
        if (s > 0.0 && s < 1.0)
            return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

SeededRng SeededRng::child(std::uint64_t index) const {
    return SeededRng(derive_seed(seed_word_, index));
}

Image standard_normal_field(SeededRng& rng, int width, int height) {
    Image img(width, height);
    for (double& p : img.pixels()) p = rng.next_normal();
    return img;
}

// ---------------------------------------------------------------------------
// PGM (P5) and raw-tensor image I/O
// ---------------------------------------------------------------------------

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Reads the next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw FormatError("pgm: truncated header");
    return tok;
}

int parse_pgm_int(const std::string& tok, const char* what) {
    try {
        std::size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw FormatError(std::string("pgm: bad ") + what + " field '" + tok + "'");
    }
}

Image load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string magic = pgm_token(in);
    if (magic != "P5") throw FormatError("pgm: expected P5, got '" + magic + "'");
    int w = parse_pgm_int(pgm_token(in), "width");
    int h = parse_pgm_int(pgm_token(in), "height");
    int maxval = parse_pgm_int(pgm_token(in), "maxval");
    if (maxval != 255 && maxval != 65535)
        throw FormatError("pgm: unsupported maxval " + std::to_string(maxval));
    // Exactly one whitespace byte separates the header from the samples;
    // pgm_token has already consumed it.
    std::vector<double> pixels(static_cast<std::size_t>(w) * h);
    if (maxval == 255) {
        std::vector<unsigned char> raw(pixels.size());
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw CorruptionError("pgm: payload shorter than header promises");
        for (std::size_t i = 0; i < raw.size(); ++i) pixels[i] = raw[i] / 255.0;
    } else {
        std::vector<unsigned char> raw(pixels.size() * 2);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw CorruptionError("pgm: payload shorter than header promises");
        for (std::size_t i = 0; i < pixels.size(); ++i) {
            // Big-endian samples per the netpbm specification.
            unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
            pixels[i] = v / 65535.0;
        }
    }
    return Image(w, h, std::move(pixels));
}

void save_pgm16(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
    std::vector<unsigned char> raw(img.size() * 2);
    const double* p = img.data();
    for (std::size_t i = 0; i < img.size(); ++i) {
        double v = p[i];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        unsigned q = static_cast<unsigned>(std::lround(v * 65535.0));
        raw[2 * i] = static_cast<unsigned char>(q >> 8);
        raw[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed: " + path);
}

} // namespace

Image load_image(const std::string& path) {
    if (ends_with(path, ".pgm")) return load_pgm(path);
    RawTensor t = read_raw_tensor(path);
    if (t.dims.size() != 2)
        throw FormatError("image tensor must be rank 2, got rank " + std::to_string(t.dims.size()));
    int h = static_cast<int>(t.dims[0]);
    int w = static_cast<int>(t.dims[1]);
    return Image(w, h, std::move(t.values));
}

void save_image(const Image& img, const std::string& path) {
    img.require_finite("save_image");
    if (ends_with(path, ".pgm")) {
        save_pgm16(img, path);
        return;
    }
    RawTensor t;
    t.dims = {static_cast<std::uint32_t>(img.height()), static_cast<std::uint32_t>(img.width())};
    t.values = img.pixels();
    write_raw_tensor(path, t);
}

} // namespace awdiff
