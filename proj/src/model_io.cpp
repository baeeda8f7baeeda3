#include "hchc/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "hchc/errors.hpp"

namespace hchc {

namespace {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

constexpr std::array<char, 8> kMagic{'H', 'C', 'H', 'C', 'M', 'D', 'L', '1'};

void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

void write_doubles(std::ostream& out, std::span<const double> values) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

void write_mlp(std::ostream& out, const Mlp& net) {
    write_u64(out, net.depth());
    for (const auto& layer : net.layers()) {
        write_u64(out, layer.spec.input_dim);
        write_u64(out, layer.spec.output_dim);
        out.put(static_cast<char>(layer.spec.activation));
        write_doubles(out, layer.weights.values());
        write_doubles(out, layer.bias);
    }
}

class Reader {
public:
    Reader(std::istream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

    void read_bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (!in_) throw IoError(path_.string() + ": truncated model file");
    }

    std::uint64_t u64() {
        std::uint64_t v = 0;
        read_bytes(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }

    std::vector<double> doubles(std::size_t n) {
        std::vector<double> v(n);
        read_bytes(reinterpret_cast<char*>(v.data()), n * sizeof(double));
        return v;
    }

    Mlp mlp() {
        const std::uint64_t depth = u64();
        if (depth == 0 || depth > 64) throw IoError(path_.string() + ": implausible layer count");
        std::vector<DenseLayer> layers;
        for (std::uint64_t l = 0; l < depth; ++l) {
            LayerSpec spec;
            spec.input_dim = u64();
            spec.output_dim = u64();
            char act = 0;
            read_bytes(&act, 1);
            if (act < 0 || act > static_cast<char>(Activation::Softmax)) {
                throw IoError(path_.string() + ": unknown activation code");
            }
            spec.activation = static_cast<Activation>(act);
            if (spec.input_dim == 0 || spec.output_dim == 0 || spec.input_dim > (1u << 24) ||
                spec.output_dim > (1u << 24)) {
                throw IoError(path_.string() + ": implausible layer shape");
            }
            DenseMatrix w(spec.input_dim, spec.output_dim, doubles(spec.input_dim * spec.output_dim));
            auto b = doubles(spec.output_dim);
            layers.push_back({spec, std::move(w), std::move(b)});
        }
        return Mlp(std::move(layers));
    }

private:
    std::istream& in_;
    const std::filesystem::path& path_;
};

}  // namespace

void save_model(const std::filesystem::path& path, const GldcModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out.write(kMagic.data(), kMagic.size());
    write_mlp(out, model.encoder);
    write_mlp(out, model.decoder);
    write_mlp(out, model.head);
    out.flush();
    if (!out) throw IoError(path.string() + ": write failed");
}

GldcModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open model file");
    Reader reader(in, path);
    std::array<char, 8> magic{};
    reader.read_bytes(magic.data(), magic.size());
    if (magic != kMagic) throw IoError(path.string() + ": not a model file");
    GldcModel model;
    model.encoder = reader.mlp();
    model.decoder = reader.mlp();
    model.head = reader.mlp();
    model.validate();
    return model;
}

}  // namespace hchc
