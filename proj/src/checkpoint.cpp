#include "nfg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace nfg {

namespace {

constexpr char kMagic[4] = {'N', 'F', 'G', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw UsageError("cannot write '" + path + "'");
    }

    void bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        bytes(&bits, 8);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    bool good() const { return static_cast<bool>(out_); }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw UsageError("cannot open '" + path + "'");
    }

    std::size_t offset() const { return offset_; }

    void bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw ParseError("unexpected end of checkpoint", offset_);
        offset_ += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    double f64() {
        std::uint64_t bits;
        bytes(&bits, 8);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > (1u << 20)) throw ParseError("implausible string length", offset_);
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    bool at_eof() {
        return in_.peek() == std::ifstream::traits_type::eof();
    }

private:
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void write_mlp(Writer& w, const MlpParams& mlp) {
    w.u8(mlp.spec.positive ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(mlp.spec.final_act));
    w.u8(mlp.spec.activate_final ? 1 : 0);
    w.f64(mlp.spec.dropout);
    w.u32(static_cast<std::uint32_t>(mlp.spec.widths.size()));
    for (int width : mlp.spec.widths) w.u32(static_cast<std::uint32_t>(width));
    w.u32(static_cast<std::uint32_t>(mlp.layers.size()));
    for (const auto& layer : mlp.layers) {
        w.u32(static_cast<std::uint32_t>(layer.in));
        w.u32(static_cast<std::uint32_t>(layer.out));
        for (double x : layer.w) w.f64(x);
        for (double x : layer.b) w.f64(x);
    }
}

MlpParams read_mlp(Reader& r) {
    MlpParams mlp;
    mlp.spec.positive = r.u8() != 0;
    const std::uint8_t act = r.u8();
    if (act > static_cast<std::uint8_t>(FinalAct::Softmax))
        throw ParseError("unknown final activation tag " + std::to_string(act), r.offset());
    mlp.spec.final_act = static_cast<FinalAct>(act);
    mlp.spec.activate_final = r.u8() != 0;
    mlp.spec.dropout = r.f64();
    const std::uint32_t n_widths = r.u32();
    if (n_widths == 0 || n_widths > 64) throw ParseError("implausible width count", r.offset());
    for (std::uint32_t i = 0; i < n_widths; ++i)
        mlp.spec.widths.push_back(static_cast<int>(r.u32()));
    const std::uint32_t n_layers = r.u32();
    if (n_layers != n_widths - 1)
        throw ParseError("layer count " + std::to_string(n_layers) + " does not match widths",
                         r.offset());
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        DenseParams d;
        d.in = static_cast<int>(r.u32());
        d.out = static_cast<int>(r.u32());
        if (d.in != mlp.spec.widths[l] || d.out != mlp.spec.widths[l + 1])
            throw ParseError("layer " + std::to_string(l) + " dimensions disagree with widths",
                             r.offset());
        d.w.resize(static_cast<std::size_t>(d.in) * static_cast<std::size_t>(d.out));
        d.b.resize(static_cast<std::size_t>(d.out));
        for (auto& x : d.w) x = r.f64();
        for (auto& x : d.b) x = r.f64();
        mlp.layers.push_back(std::move(d));
    }
    return mlp;
}

}  // namespace

void checkpoint_save(const NfgModel& model, const std::string& path) {
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u8(static_cast<std::uint8_t>(model.variant));
    w.u32(static_cast<std::uint32_t>(model.n_features));
    w.u32(static_cast<std::uint32_t>(model.n_risks));
    w.f64(model.t_scale);
    for (double m : model.feat_mean) w.f64(m);
    for (double s : model.feat_std) w.f64(s);
    w.u32(static_cast<std::uint32_t>(model.feature_names.size()));
    for (const auto& name : model.feature_names) w.str(name);
    write_mlp(w, model.embedding);
    w.u32(static_cast<std::uint32_t>(model.monotonic.size()));
    for (const auto& m : model.monotonic) write_mlp(w, m);
    w.u8(model.has_balancing() ? 1 : 0);
    if (model.has_balancing()) write_mlp(w, model.balancing);
    if (!w.good()) throw UsageError("failed while writing '" + path + "'");
}

NfgModel checkpoint_load(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("'" + path + "' is not an NFG checkpoint (bad magic)", 0);
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version) +
                             " (this build reads version " + std::to_string(kVersion) + ")",
                         4);

    NfgModel model;
    const std::uint8_t variant = r.u8();
    if (variant > static_cast<std::uint8_t>(Variant::CauseSpecific))
        throw ParseError("unknown variant tag " + std::to_string(variant), r.offset());
    model.variant = static_cast<Variant>(variant);
    model.n_features = static_cast<int>(r.u32());
    model.n_risks = static_cast<int>(r.u32());
    if (model.n_features < 1 || model.n_features > 100000)
        throw ParseError("implausible feature count", r.offset());
    if (model.n_risks < 1 || model.n_risks > 1000)
        throw ParseError("implausible risk count", r.offset());
    model.t_scale = r.f64();
    if (!(model.t_scale > 0.0)) throw ParseError("t_scale must be positive", r.offset());
    model.feat_mean.resize(static_cast<std::size_t>(model.n_features));
    model.feat_std.resize(static_cast<std::size_t>(model.n_features));
    for (auto& m : model.feat_mean) m = r.f64();
    for (auto& s : model.feat_std) s = r.f64();
    const std::uint32_t n_names = r.u32();
    if (n_names != 0 && n_names != static_cast<std::uint32_t>(model.n_features))
        throw ParseError("feature name count does not match feature count", r.offset());
    for (std::uint32_t i = 0; i < n_names; ++i) model.feature_names.push_back(r.str());

    model.embedding = read_mlp(r);
    const std::uint32_t n_mono = r.u32();
    const std::uint32_t expected =
        model.variant == Variant::MonoFg ? 1u : static_cast<std::uint32_t>(model.n_risks);
    if (n_mono != expected)
        throw ParseError("checkpoint declares " + std::to_string(model.n_risks) +
                             " risks but stores " + std::to_string(n_mono) + " monotonic networks",
                         r.offset());
    for (std::uint32_t i = 0; i < n_mono; ++i) model.monotonic.push_back(read_mlp(r));
    const std::uint8_t has_bal = r.u8();
    if (model.variant == Variant::CauseSpecific) {
        if (has_bal != 0)
            throw ParseError("cause-specific checkpoint must not store a balancing network",
                             r.offset());
    } else {
        if (has_bal != 1)
            throw ParseError("checkpoint is missing the balancing network", r.offset());
        model.balancing = read_mlp(r);
    }
    if (!r.at_eof()) throw ParseError("trailing bytes after checkpoint payload", r.offset());

    // structural sanity matching what staging assumes
    const int expected_mono_out = model.variant == Variant::MonoFg ? model.n_risks : 1;
    for (const auto& m : model.monotonic) {
        if (m.spec.output_dim() != expected_mono_out)
            throw ParseError("monotonic network output dimension disagrees with variant", r.offset());
        if (m.spec.input_dim() != 1 + model.embedding.spec.output_dim())
            throw ParseError("monotonic network input dimension disagrees with embedding", r.offset());
    }
    return model;
}

}  // namespace nfg
