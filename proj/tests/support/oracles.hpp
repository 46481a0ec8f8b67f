#pragma once

// Slow, direct reference implementations used as test oracles. None of them
// call into the library code they check.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace oracle {

struct Rgb8 {
    int r, g, b;
};

// Studio-range BT.601 evaluated from the integer-thousandth coefficients in
// double precision, rounded half-up and clamped.
Rgb8 yuv_to_rgb(int y, int cb, int cr);

struct Gray {
    int width = 0;
    int height = 0;
    std::vector<double> v;
    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

// Dense SIFT written as an explicit sum over patch pixels of magnitude times
// triangular spatial and orientation weight functions.
std::vector<std::array<double, 128>> dsift(const Gray& image, int step, const std::vector<int>& bin_sizes);

// Hinge-loss dual with bias folded in as a constant feature, solved by
// projected gradient ascent. Returns (w, b).
struct Hyperplane {
    std::vector<double> w;
    double b = 0.0;
    double decision(const std::vector<double>& x) const;
};
Hyperplane svm_dual(const std::vector<std::vector<double>>& x, const std::vector<int>& y, double c,
                    int iterations = 200000);

double platt_nll(const std::vector<double>& f, const std::vector<int>& y, double a, double b);

// Minimum of the coupling objective over a 3-class simplex grid.
std::array<double, 3> coupling_grid(const std::array<std::array<double, 3>, 3>& r, double step = 0.001);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace oracle
