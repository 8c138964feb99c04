#include "binary_io.hpp"
#include "effgnn/error.hpp"
#include "effgnn/gnn.hpp"
#include "graph_io.hpp"

namespace effgnn {

namespace {

constexpr std::string_view kModelMagic = "EGNM";

void write_config(detail::BinaryWriter& w, const GnnConfig& c) {
    w.u32(static_cast<std::uint32_t>(c.conv_channels.size()));
    for (auto ch : c.conv_channels) w.u32(ch);
    w.u32(c.sortpool_k);
    w.u8(c.conv1d_enabled ? 1 : 0);
    w.u32(c.conv1d_channels_1);
    w.u32(c.conv1d_channels_2);
    w.u32(c.conv1d_kernel_2);
    w.u32(c.conv1d_stride_2);
    w.u32(c.pool_size);
    w.u32(c.dense_hidden);
    w.f64(c.dropout_rate);
    w.u8(static_cast<std::uint8_t>(c.activation));
}

GnnConfig read_config(detail::BinaryReader& r) {
    GnnConfig c;
    const auto layers = r.u32();
    if (layers == 0 || layers > 1024) r.fail("implausible conv layer count");
    c.conv_channels.clear();
    for (std::uint32_t i = 0; i < layers; ++i) c.conv_channels.push_back(r.u32());
    c.sortpool_k = r.u32();
    c.conv1d_enabled = r.u8() != 0;
    c.conv1d_channels_1 = r.u32();
    c.conv1d_channels_2 = r.u32();
    c.conv1d_kernel_2 = r.u32();
    c.conv1d_stride_2 = r.u32();
    c.pool_size = r.u32();
    c.dense_hidden = r.u32();
    c.dropout_rate = r.f64();
    c.activation = static_cast<Activation>(r.u8());
    return c;
}

}  // namespace

std::string serialize_model(const GnnModel& model) {
    detail::BinaryWriter w;
    w.bytes(kModelMagic);
    w.u32(kModelFormatVersion);
    w.u32(static_cast<std::uint32_t>(model.feature_dim));
    w.u32(static_cast<std::uint32_t>(model.n_classes));
    write_config(w, model.config);
    w.u32(static_cast<std::uint32_t>(model.info.class_names.size()));
    for (const auto& name : model.info.class_names) w.str(name);
    detail::write_build_config(w, model.info.build);

    std::uint32_t tensors = 0;
    model.params.for_each([&](const Matrix<float>&) { ++tensors; });
    w.u32(tensors);
    model.params.for_each([&](const Matrix<float>& m) {
        w.u32(static_cast<std::uint32_t>(m.rows));
        w.u32(static_cast<std::uint32_t>(m.cols));
        w.f32s(m.data);
    });
    return w.buffer();
}

GnnModel deserialize_model(std::string bytes, std::string what) {
    detail::BinaryReader r(std::move(bytes), std::move(what));
    r.expect_magic(kModelMagic);
    const auto version = r.u32();
    if (version != kModelFormatVersion)
        throw VersionError("model file version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kModelFormatVersion) + ")");
    const auto feature_dim = r.u32();
    const auto n_classes = r.u32();
    const auto config = read_config(r);

    // The expected tensor shapes come from a freshly built model.
    GnnModel model;
    try {
        model = make_model<float>(config, feature_dim, n_classes, 0);
    } catch (const Error& e) {
        r.fail(std::string("invalid model header: ") + e.what());
    }
    const auto names = r.u32();
    if (names != 0 && names != n_classes) r.fail("class name count disagrees with n_classes");
    for (std::uint32_t i = 0; i < names; ++i) model.info.class_names.push_back(r.str());
    model.info.build = detail::read_build_config(r);

    std::uint32_t expected = 0;
    model.params.for_each([&](const Matrix<float>&) { ++expected; });
    if (r.u32() != expected) r.fail("tensor count disagrees with config");
    model.params.for_each([&](Matrix<float>& m) {
        const auto rows = r.u32();
        const auto cols = r.u32();
        if (rows != m.rows || cols != m.cols) r.fail("tensor shape disagrees with config");
        r.f32s(m.data);
        for (float v : m.data)
            if (!std::isfinite(v)) r.fail("non-finite parameter");
    });
    r.expect_end();
    return model;
}

void save_model(const GnnModel& model, const std::filesystem::path& path) {
    detail::BinaryWriter w;
    w.bytes(serialize_model(model));
    w.write_file(path);
}

GnnModel load_model(const std::filesystem::path& path) {
    return deserialize_model(detail::read_file(path), path.string());
}

}  // namespace effgnn
