#include "greenflow/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace greenflow {

std::vector<std::string> channel_names() {
    return {"potential", "log_charge", "vd", "vg", "map_x", "map_y", "map_z"};
}

std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

NormStats norm_stats(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("norm_stats: empty input");
    // Accumulate about the first value so that a constant input has an
    // exact mean and normalises to zeros.
    const double pivot = values.front();
    double shift = 0.0;
    for (double v : values) shift += v - pivot;
    const double mean = pivot + shift / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return {mean, std::max(std::sqrt(var), norm_std_floor)};
}

std::vector<double> field_image(const Field& f) {
    std::vector<double> img(f.size());
    for (int iy = 0; iy < f.ny(); ++iy)
        for (int ix = 0; ix < f.nx(); ++ix) img[static_cast<std::size_t>(iy) * f.nx() + ix] = f(ix, iy);
    return img;
}

nn::Tensor4 location_maps(int height, int width) {
    if (height < 2 || width < 2) throw std::invalid_argument("location_maps: dims must be at least 2");
    nn::Tensor4 m(1, 3, height, width);
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) {
            m(0, 0, i, j) = static_cast<double>(j) / (width - 1);
            m(0, 1, i, j) = static_cast<double>(i) / (height - 1);
            m(0, 2, i, j) = 0.5;
        }
    return m;
}

int padded_size(int n, int m) { return (n + m - 1) / m * m; }

std::vector<double> reflect_pad(std::span<const double> image, int height, int width, int padded_h, int padded_w) {
    if (image.size() != static_cast<std::size_t>(height) * width) throw std::invalid_argument("reflect_pad: size mismatch");
    if (padded_h < height || padded_w < width || padded_h - height >= height || padded_w - width >= width)
        throw std::invalid_argument("reflect_pad: padding must be smaller than the image");
    auto mirror = [](int i, int n) { return i < n ? i : 2 * (n - 1) - i; };
    std::vector<double> out(static_cast<std::size_t>(padded_h) * padded_w);
    for (int i = 0; i < padded_h; ++i)
        for (int j = 0; j < padded_w; ++j)
            out[static_cast<std::size_t>(i) * padded_w + j] =
                image[static_cast<std::size_t>(mirror(i, height)) * width + mirror(j, width)];
    return out;
}

namespace {

void put_channel(nn::Tensor4& t, int c, std::span<const double> padded) {
    std::copy(padded.begin(), padded.end(), t.sample(0) + static_cast<std::size_t>(c) * t.h() * t.w());
}

std::vector<double> normalised(const std::vector<double>& img, const NormStats& s) {
    std::vector<double> out(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = s.apply(img[i]);
    return out;
}

}  // namespace

EncodedInput build_input(const Field& potential, const Field& density, double vg, double vd, int multiple) {
    if (!potential.same_shape(density)) throw std::invalid_argument("build_input: field shapes differ");
    if (potential.quantity() != Quantity::Potential || density.quantity() != Quantity::ElectronDensity)
        throw std::invalid_argument("build_input: expected a potential and an electron density");
    const int h = potential.ny(), w = potential.nx();
    const int ph = padded_size(h, multiple), pw = padded_size(w, multiple);

    EncodedInput e;
    e.height = h;
    e.width = w;
    e.image = nn::Tensor4(1, input_channels, ph, pw);
    const std::vector<double> v = field_image(potential);
    const std::vector<double> ln = field_image(log_density(density));
    e.potential = norm_stats(v);
    e.log_charge = norm_stats(ln);
    put_channel(e.image, Channel::Potential, reflect_pad(normalised(v, e.potential), h, w, ph, pw));
    put_channel(e.image, Channel::LogCharge, reflect_pad(normalised(ln, e.log_charge), h, w, ph, pw));
    put_channel(e.image, Channel::DrainBias, std::vector<double>(static_cast<std::size_t>(ph) * pw, vd));
    put_channel(e.image, Channel::GateBias, std::vector<double>(static_cast<std::size_t>(ph) * pw, vg));
    const nn::Tensor4 maps = location_maps(h, w);
    for (int c = 0; c < 3; ++c) {
        const std::span<const double> m(maps.sample(0) + static_cast<std::size_t>(c) * h * w,
                                        static_cast<std::size_t>(h) * w);
        put_channel(e.image, Channel::MapX + c, reflect_pad(m, h, w, ph, pw));
    }
    return e;
}

nn::Tensor4 encode_target(const Field& f, const NormStats& stats, int padded_h, int padded_w) {
    const std::vector<double> img = f.quantity() == Quantity::ElectronDensity ? field_image(log_density(f))
                                                                               : field_image(f);
    nn::Tensor4 t(1, 1, padded_h, padded_w);
    put_channel(t, 0, reflect_pad(normalised(img, stats), f.ny(), f.nx(), padded_h, padded_w));
    return t;
}

Field decode_image(const nn::Tensor4& image, int n, const NormStats& stats, int height, int width, Quantity q) {
    if (n < 0 || n >= image.n() || height > image.h() || width > image.w())
        throw std::invalid_argument("decode_image: crop outside the image");
    Field f(width, height, q);
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) f(j, i) = stats.invert(image(n, 0, i, j));
    return f;
}

}  // namespace greenflow
