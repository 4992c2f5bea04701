#include "breathradar/formats.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace breathradar {
namespace {

class ByteWriter {
public:
    void raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
    template <class U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(char((std::uint64_t(v) >> (8 * i)) & 0xff));
    }
    void f32(float f) { le(std::bit_cast<std::uint32_t>(f)); }
    void f64(double d) { le(std::bit_cast<std::uint64_t>(d)); }
    const std::vector<char>& bytes() const { return bytes_; }
    void reserve(std::size_t n) { bytes_.reserve(n); }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    ByteReader(std::vector<char> b, std::string what) : bytes_(std::move(b)), what_(std::move(what)) {}
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw FormatError(what_ + ": truncated file");
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    template <class U>
    U le() {
        need(sizeof(U));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= std::uint64_t(std::uint8_t(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return U(v);
    }
    float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::vector<char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void write_priq(const std::filesystem::path& path, const IQBuffer& buf) {
    ByteWriter w;
    w.reserve(kPriqHeaderBytes + 8 * buf.size());
    w.raw("PRIQ", 4);
    w.le<std::uint16_t>(kPriqVersion);
    w.f64(buf.sample_rate);
    w.le<std::uint64_t>(buf.size());
    for (const auto& v : buf.samples) {
        w.f32(float(v.real()));
        w.f32(float(v.imag()));
    }
    dump(path, w.bytes());
}

IQBuffer read_priq(const std::filesystem::path& path) {
    ByteReader r(slurp(path), "PRIQ " + path.string());
    if (r.raw(4) != "PRIQ") throw FormatError("not a PRIQ file: " + path.string());
    if (const auto v = r.le<std::uint16_t>(); v != kPriqVersion) throw FormatError("unsupported PRIQ version " + std::to_string(v));
    IQBuffer buf;
    buf.sample_rate = r.f64();
    const auto count = r.le<std::uint64_t>();
    if (r.remaining() != count * 8) throw FormatError("PRIQ body size does not match sample_count");
    buf.samples.resize(count);
    for (auto& s : buf.samples) {
        const float re = r.f32();
        const float im = r.f32();
        s = {re, im};
    }
    return buf;
}

std::vector<cplx> Psgm::complex_values() const {
    if (kind != PsgmKind::Complex) throw FormatError("PSGM payload is not complex");
    std::vector<cplx> v(data.size() / 2);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = {data[2 * i], data[2 * i + 1]};
    return v;
}

void write_psgm(const std::filesystem::path& path, const Psgm& m) {
    const std::size_t per = m.kind == PsgmKind::Complex ? 2 : 1;
    if (m.data.size() != std::size_t(m.rows) * m.cols * per) throw InputError("PSGM data size does not match dims");
    ByteWriter w;
    w.reserve(kPsgmHeaderBytes + 4 * m.data.size());
    w.raw("PSGM", 4);
    w.le<std::uint16_t>(kPsgmVersion);
    w.le<std::uint32_t>(m.rows);
    w.le<std::uint32_t>(m.cols);
    w.le<std::uint8_t>(std::uint8_t(m.kind));
    for (float f : m.data) w.f32(f);
    dump(path, w.bytes());
}

Psgm read_psgm(const std::filesystem::path& path) {
    ByteReader r(slurp(path), "PSGM " + path.string());
    if (r.raw(4) != "PSGM") throw FormatError("not a PSGM file: " + path.string());
    if (const auto v = r.le<std::uint16_t>(); v != kPsgmVersion) throw FormatError("unsupported PSGM version " + std::to_string(v));
    Psgm m;
    m.rows = r.le<std::uint32_t>();
    m.cols = r.le<std::uint32_t>();
    const auto kind = r.le<std::uint8_t>();
    if (kind > 1) throw FormatError("unknown PSGM payload kind " + std::to_string(kind));
    m.kind = PsgmKind(kind);
    const std::size_t count = std::size_t(m.rows) * m.cols * (m.kind == PsgmKind::Complex ? 2 : 1);
    if (r.remaining() != count * 4) throw FormatError("PSGM body size does not match dims");
    m.data.resize(count);
    for (auto& f : m.data) f = r.f32();
    return m;
}

Psgm to_psgm_complex(const DopplerMap& map) {
    Psgm m{std::uint32_t(map.rows), std::uint32_t(map.cols), PsgmKind::Complex, {}};
    m.data.reserve(map.values.size() * 2);
    for (const auto& v : map.values) {
        m.data.push_back(float(v.real()));
        m.data.push_back(float(v.imag()));
    }
    return m;
}

Psgm to_psgm_magnitude(const DopplerMap& map) {
    Psgm m{std::uint32_t(map.rows), std::uint32_t(map.cols), PsgmKind::Magnitude, {}};
    m.data.reserve(map.values.size());
    for (const auto& v : map.values) m.data.push_back(float(std::abs(v)));
    return m;
}

Psgm to_psgm_detections(const CfarMap& c) {
    Psgm m{std::uint32_t(c.rows), std::uint32_t(c.cols), PsgmKind::Magnitude, {}};
    m.data.reserve(c.detections.size());
    for (auto d : c.detections) m.data.push_back(d ? 1.0f : 0.0f);
    return m;
}

Psgm to_psgm_thresholds(const CfarMap& c) {
    Psgm m{std::uint32_t(c.rows), std::uint32_t(c.cols), PsgmKind::Magnitude, {}};
    m.data.reserve(c.threshold_map.size());
    for (double t : c.threshold_map) m.data.push_back(float(t));
    return m;
}

DopplerMap doppler_map_from_psgm(const Psgm& m, std::vector<double> doppler_axis, std::vector<double> time_axis,
                                 int channel_id) {
    if (doppler_axis.size() != m.cols || time_axis.size() != m.rows) throw FormatError("PSGM axes do not match dims");
    DopplerMap map;
    map.rows = int(m.rows);
    map.cols = int(m.cols);
    map.values = m.complex_values();
    map.doppler_axis = std::move(doppler_axis);
    map.time_axis = std::move(time_axis);
    map.channel_id = channel_id;
    return map;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    dump(path, std::vector<char>(text.begin(), text.end()));
}

std::string read_text(const std::filesystem::path& path) {
    const auto b = slurp(path);
    return {b.begin(), b.end()};
}

}  // namespace breathradar
