#include "msa/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace msa {

namespace {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    const std::string where;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw DataError("truncated file: " + where);
    }
    void raw(void* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, buf.data() + pos, n);
        pos += n;
    }
    template <typename T>
    T get() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

template <typename T>
void put(std::string& out, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(b, sizeof(T));
}

double parse_number(const std::string& tok, int line_no) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line_no) + ": not a number: " + tok);
    }
    if (used != tok.size()) {
        throw DataError("line " + std::to_string(line_no) + ": not a number: " + tok);
    }
    return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

Annotation parse_annotation(const std::string& text, const std::string& song_id) {
    std::vector<Segment> segs;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = strip(line);
        if (t.empty() || t[0] == '#') continue;
        auto cols = split_tabs(t);
        if (cols.size() != 3) {
            throw DataError("line " + std::to_string(line_no) +
                            ": expected start<TAB>end<TAB>label");
        }
        Segment s;
        s.start = parse_number(cols[0], line_no);
        s.end = parse_number(cols[1], line_no);
        s.label = strip(cols[2]);
        if (s.label.empty()) {
            throw DataError("line " + std::to_string(line_no) + ": empty label");
        }
        segs.push_back(std::move(s));
    }
    if (segs.empty()) throw DataError("annotation has no segments");
    return Annotation(std::move(segs), song_id);
}

Annotation load_annotation(const std::filesystem::path& path,
                           const std::string& song_id) {
    try {
        return parse_annotation(read_file(path), song_id);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string format_annotation(const Annotation& ann) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    for (const Segment& s : ann.segments()) {
        out << s.start << '\t' << s.end << '\t' << s.label << '\n';
    }
    return out.str();
}

void save_annotation(const Annotation& ann, const std::filesystem::path& path) {
    write_file(path, format_annotation(ann));
}

BeatGrids parse_beats(const std::string& text) {
    std::vector<double> beats, downbeats;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = strip(line);
        if (t.empty() || t[0] == '#') continue;
        auto cols = split_tabs(t);
        if (cols.size() != 2) {
            throw DataError("line " + std::to_string(line_no) +
                            ": expected time<TAB>position");
        }
        const double time = parse_number(cols[0], line_no);
        const double pos = parse_number(cols[1], line_no);
        if (pos < 1.0 || pos != std::floor(pos)) {
            throw DataError("line " + std::to_string(line_no) +
                            ": position must be an integer >= 1");
        }
        if (!beats.empty() && time <= beats.back()) {
            throw DataError("line " + std::to_string(line_no) +
                            ": beat times not increasing");
        }
        beats.push_back(time);
        if (pos == 1.0) downbeats.push_back(time);
    }
    if (beats.size() < 2) throw DataError("need at least 2 beats");
    if (downbeats.size() < 2) throw DataError("need at least 2 downbeats");
    return {TimeGrid(std::move(beats), GridKind::Beat),
            TimeGrid(std::move(downbeats), GridKind::Downbeat)};
}

BeatGrids load_beats(const std::filesystem::path& path) {
    try {
        return parse_beats(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_matrix(const FeatureMatrix& fm, const std::filesystem::path& path) {
    fm.validate();
    if (fm.data.rows() < 1) throw DataError("refusing to write empty matrix");
    std::string out = "MSAMAT1\n";
    put<std::uint32_t>(out, static_cast<std::uint32_t>(fm.data.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(fm.data.cols()));
    for (Eigen::Index i = 0; i < fm.data.rows(); ++i) {
        for (Eigen::Index j = 0; j < fm.data.cols(); ++j) {
            put<float>(out, static_cast<float>(fm.data(i, j)));
        }
    }
    for (double t : fm.frame_times) put<double>(out, t);
    write_file(path, out);
}

FeatureMatrix load_matrix(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path.string()};
    if (r.bytes(8) != "MSAMAT1\n") throw DataError("bad magic in " + path.string());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (rows < 1 || cols < 1) throw DataError("empty matrix in " + path.string());
    FeatureMatrix fm;
    fm.data.resize(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) {
            fm.data(i, j) = static_cast<double>(r.get<float>());
        }
    }
    fm.frame_times.resize(rows);
    for (std::uint32_t i = 0; i < rows; ++i) fm.frame_times[i] = r.get<double>();
    if (r.pos != buf.size()) throw DataError("trailing bytes in " + path.string());
    fm.validate();
    return fm;
}

void save_checkpoint(EmbeddingNet& net,
                     const std::map<std::string, std::string>& config,
                     const std::filesystem::path& path) {
    std::string out = "MSANET1\n";
    auto tensors = net.state_tensors();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const ParamView& t : tensors) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
        out += t.name;
        const std::uint8_t rank = t.cols == 1 ? 1 : 2;
        put<std::uint8_t>(out, rank);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows));
        if (rank == 2) put<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols));
        // Eigen stores column-major; emit row-major as the format requires
        Eigen::Map<const Matrix> m(t.data, t.rows, t.cols);
        for (Eigen::Index i = 0; i < t.rows; ++i) {
            for (Eigen::Index j = 0; j < t.cols; ++j) put<double>(out, m(i, j));
        }
    }
    // the loader needs the architecture to rebuild the net
    std::map<std::string, std::string> full = config;
    const NetOptions& opt = net.options();
    full["in_dim"] = std::to_string(opt.in_dim);
    full["hidden_dim"] = std::to_string(opt.hidden_dim);
    full["out_dim"] = std::to_string(opt.out_dim);
    full["l2_normalize"] = opt.l2_normalize ? "1" : "0";
    std::string cfg_text;
    for (const auto& [k, v] : full) cfg_text += k + "=" + v + "\n";
    put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_text.size()));
    out += cfg_text;
    write_file(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path.string()};
    if (r.bytes(8) != "MSANET1\n") throw DataError("bad magic in " + path.string());
    const auto count = r.get<std::uint32_t>();
    std::map<std::string, Matrix> tensors;
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = r.get<std::uint16_t>();
        const std::string name = r.bytes(name_len);
        const auto rank = r.get<std::uint8_t>();
        if (rank < 1 || rank > 2) throw DataError("bad tensor rank for " + name);
        const auto rows = r.get<std::uint32_t>();
        const std::uint32_t cols = rank == 2 ? r.get<std::uint32_t>() : 1;
        Matrix m(rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i) {
            for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.get<double>();
        }
        tensors[name] = std::move(m);
    }
    const auto cfg_len = r.get<std::uint32_t>();
    const std::string cfg_text = r.bytes(cfg_len);
    if (r.pos != buf.size()) throw DataError("trailing bytes in " + path.string());

    Checkpoint ck;
    ck.config = parse_config(cfg_text);

    NetOptions opt;
    auto cfg_int = [&](const char* key, int fallback) {
        auto it = ck.config.find(key);
        return it == ck.config.end() ? fallback : std::stoi(it->second);
    };
    opt.in_dim = cfg_int("in_dim", opt.in_dim);
    opt.hidden_dim = cfg_int("hidden_dim", opt.hidden_dim);
    opt.out_dim = cfg_int("out_dim", opt.out_dim);
    opt.l2_normalize = cfg_int("l2_normalize", 1) != 0;
    ck.net = EmbeddingNet(opt);
    for (ParamView v : ck.net.state_tensors()) {
        auto it = tensors.find(v.name);
        if (it == tensors.end()) throw DataError("checkpoint missing tensor " + v.name);
        const Matrix& m = it->second;
        if (m.rows() != v.rows || m.cols() != v.cols) {
            throw DataError("checkpoint shape mismatch for " + v.name);
        }
        Eigen::Map<Matrix>(v.data, v.rows, v.cols) = m;
    }
    ck.net.set_train(false);
    return ck;
}

void render_ssm(const Ssm& ssm, const std::filesystem::path& path) {
    const Eigen::Index n = ssm.s.rows();
    std::string out = "P5\n" + std::to_string(n) + " " + std::to_string(n) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(n) * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = std::clamp(ssm.s(i, j), 0.0, 1.0);
            out.push_back(static_cast<char>(
                static_cast<unsigned char>(std::lround(255.0 * v))));
        }
    }
    write_file(path, out);
}

WavData load_wav(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path.string()};
    if (r.bytes(4) != "RIFF") throw DataError("not a RIFF file: " + path.string());
    r.get<std::uint32_t>();
    if (r.bytes(4) != "WAVE") throw DataError("not a WAVE file: " + path.string());

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    WavData out;
    while (r.pos + 8 <= buf.size()) {
        const std::string id = r.bytes(4);
        const auto size = r.get<std::uint32_t>();
        if (id == "fmt ") {
            const std::size_t end = r.pos + size;
            format = r.get<std::uint16_t>();
            channels = r.get<std::uint16_t>();
            rate = r.get<std::uint32_t>();
            r.get<std::uint32_t>();
            r.get<std::uint16_t>();
            bits = r.get<std::uint16_t>();
            r.pos = end;
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw DataError("data chunk before fmt: " + path.string());
            if (channels < 1) throw DataError("bad channel count");
            const std::size_t bytes_per = bits / 8;
            if (format == 1 && (bits == 16 || bits == 24)) {
                // ok
            } else if (format == 3 && bits == 32) {
                // ok
            } else {
                throw DataError("unsupported WAV format (need PCM16/24 or float32)");
            }
            const std::size_t n_frames = size / (bytes_per * channels);
            out.samples.resize(n_frames);
            for (std::size_t f = 0; f < n_frames; ++f) {
                double acc = 0.0;
                for (int c = 0; c < channels; ++c) {
                    if (format == 3) {
                        acc += static_cast<double>(r.get<float>());
                    } else if (bits == 16) {
                        acc += r.get<std::int16_t>() / 32768.0;
                    } else {
                        std::uint8_t b0 = r.get<std::uint8_t>();
                        std::uint8_t b1 = r.get<std::uint8_t>();
                        std::uint8_t b2 = r.get<std::uint8_t>();
                        std::int32_t v = (b2 << 16) | (b1 << 8) | b0;
                        if (v & 0x800000) v |= ~0xFFFFFF;
                        acc += v / 8388608.0;
                    }
                }
                out.samples[f] = acc / channels;
            }
            out.sample_rate = static_cast<int>(rate);
            return out;
        } else {
            r.need(size);
            r.pos += size + (size % 2);
        }
    }
    throw DataError("no data chunk in " + path.string());
}

void save_wav(const std::vector<double>& samples, int sample_rate,
              const std::filesystem::path& path) {
    std::string data;
    data.reserve(samples.size() * 2);
    for (double s : samples) {
        const double c = std::clamp(s, -1.0, 1.0);
        put<std::int16_t>(data, static_cast<std::int16_t>(std::lround(c * 32767.0)));
    }
    std::string out = "RIFF";
    put<std::uint32_t>(out, static_cast<std::uint32_t>(36 + data.size()));
    out += "WAVEfmt ";
    put<std::uint32_t>(out, 16);
    put<std::uint16_t>(out, 1);
    put<std::uint16_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate * 2));
    put<std::uint16_t>(out, 2);
    put<std::uint16_t>(out, 16);
    out += "data";
    put<std::uint32_t>(out, static_cast<std::uint32_t>(data.size()));
    out += data;
    write_file(path, out);
}

std::map<std::string, std::string> parse_config(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = strip(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw DataError("config line " + std::to_string(line_no) +
                            ": expected key = value");
        }
        const std::string key = strip(t.substr(0, eq));
        const std::string value = strip(t.substr(eq + 1));
        if (key.empty()) {
            throw DataError("config line " + std::to_string(line_no) + ": empty key");
        }
        out[key] = value;
    }
    return out;
}

std::map<std::string, std::string> load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path));
}

std::string metrics_tsv_row(const std::string& song_id, const SegmentMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n",
                  song_id.c_str(), m.hr05f, m.hr3f, m.pwf, m.sf, m.summary);
    return buf;
}

} // namespace msa
