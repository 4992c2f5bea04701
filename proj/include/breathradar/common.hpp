#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace breathradar {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

// Error taxonomy. Every failure raised by the library derives from Error so
// callers can catch broadly, while the CLI maps ConfigError/InputError to
// usage exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Complex baseband samples plus the rate they were taken at.
struct IQBuffer {
    double sample_rate = 0.0;
    std::vector<cplx> samples;

    std::size_t size() const { return samples.size(); }
    double duration() const { return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0; }
};

/// Mean of |x|^2; zero for an empty range.
template <class Range>
double mean_power(const Range& r) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& v : r) {
        acc += std::norm(v);
        ++n;
    }
    return n ? acc / double(n) : 0.0;
}

// Rounds x to the nearest integer if it is within tol of one; throws otherwise.
std::size_t exact_sample_count(double seconds, double sample_rate, const char* what, double tol = 1e-6);

}  // namespace breathradar
