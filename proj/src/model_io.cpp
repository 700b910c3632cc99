#include "bbmvote/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "bbmvote/errors.hpp"

namespace bbmvote {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string out = "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt(v[i]);
    }
    return out + "]";
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

class Document {
  public:
    explicit Document(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ValidationError("model document: expected 'key = value', got '" + line + "'");
            std::string key = trim(line.substr(0, eq));
            std::string val = trim(line.substr(eq + 1));
            if (key.empty() || val.empty())
                throw ValidationError("model document: empty key or value in '" + line + "'");
            if (!entries_.emplace(key, val).second)
                throw ValidationError("model document: duplicate key '" + key + "'");
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    const std::string& raw(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw ValidationError("model document: missing key '" + key + "'");
        return it->second;
    }

    double number(const std::string& key) const {
        const std::string& s = raw(key);
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size())
            throw ValidationError("model document: bad number for '" + key + "': " + s);
        return v;
    }

    int integer(const std::string& key) const {
        double v = number(key);
        int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw ValidationError("model document: '" + key + "' must be an integer");
        return i;
    }

    std::vector<double> list(const std::string& key) const {
        std::string s = raw(key);
        if (s.front() != '[' || s.back() != ']')
            throw ValidationError("model document: '" + key + "' must be a [list]");
        for (char& c : s)
            if (c == '[' || c == ']' || c == ',') c = ' ';
        std::istringstream in(s);
        std::vector<double> out;
        double v;
        while (in >> v) out.push_back(v);
        if (!in.eof() || out.empty())
            throw ValidationError("model document: bad list for '" + key + "'");
        return out;
    }

    std::map<int, double> int_map(const std::string& key) const {
        std::string s = raw(key);
        if (s.front() != '{' || s.back() != '}')
            throw ValidationError("model document: '" + key + "' must be a {map}");
        for (char& c : s)
            if (c == '{' || c == '}' || c == ',' || c == ':') c = ' ';
        std::istringstream in(s);
        std::map<int, double> out;
        int k;
        double v;
        while (in >> k >> v) out[k] = v;
        if (!in.eof() || out.empty())
            throw ValidationError("model document: bad map for '" + key + "'");
        return out;
    }

  private:
    std::map<std::string, std::string> entries_;
};

void require_valid(const Model& m) {
    ModelDiagnostics d = validate(m);
    if (!d.valid) {
        std::string msg = "model document fails validation:";
        for (const auto& issue : d.issues) msg += "\n  - " + issue;
        throw ValidationError(msg);
    }
}

}  // namespace

std::string write_model(const Model& model) {
    std::ostringstream out;
    if (const auto* m = std::get_if<RandomOutcomeModel>(&model)) {
        out << "kind = outcome\n";
        out << "rate = " << fmt(m->rate) << "\n";
        out << "offspring = {";
        bool first = true;
        for (auto& [k, p] : m->offspring.probs()) {
            out << (first ? " " : ", ") << k << ": " << fmt(p);
            first = false;
        }
        out << " }\n";
        for (auto& [n, row] : m->alpha) out << "alpha." << n << " = " << fmt_list(row) << "\n";
    } else if (const auto* m = std::get_if<RandomThresholdModel>(&model)) {
        out << "kind = threshold\n";
        out << "rate = " << fmt(m->rate) << "\n";
        out << "arity = " << m->arity << "\n";
        out << "zeta = " << fmt_list(m->zeta) << "\n";
    } else if (const auto* m = std::get_if<RecursiveModel>(&model)) {
        out << "kind = recursive\n";
        out << "arity = " << m->arity << "\n";
        out << "f = " << fmt_list(m->f.coeffs()) << "\n";
        out << "symmetric_coeffs = " << fmt_list(m->symmetric_coeffs) << "\n";
    } else if (const auto* m = std::get_if<CompositeLabelModel>(&model)) {
        out << "kind = composite\n";
        out << "rate = " << fmt(m->rate) << "\n";
        out << "arity = " << m->arity << "\n";
        out << "labels = " << m->labels.size() << "\n";
        for (size_t i = 0; i < m->labels.size(); ++i) {
            const auto& lab = m->labels[i];
            out << "label." << i + 1 << ".name = " << lab.name << "\n";
            out << "label." << i + 1 << ".prob = " << fmt(lab.prob) << "\n";
            out << "label." << i + 1 << ".alpha = " << fmt_list(lab.alpha) << "\n";
        }
    }
    return out.str();
}

Model read_model(const std::string& text) {
    Document doc(text);
    const std::string kind = doc.raw("kind");
    if (kind == "outcome") {
        RandomOutcomeModel m{doc.number("rate"), OffspringDistribution(doc.int_map("offspring")),
                             {}};
        for (auto& [n, p] : m.offspring.probs())
            m.alpha[n] = doc.list("alpha." + std::to_string(n));
        require_valid(m);
        return m;
    }
    if (kind == "threshold") {
        RandomThresholdModel m{doc.number("rate"), doc.integer("arity"), doc.list("zeta")};
        Model out = m;
        require_valid(out);
        return out;
    }
    if (kind == "recursive") {
        int arity = doc.integer("arity");
        RecursiveModel m{arity, Polynomial(doc.list("f")), doc.list("symmetric_coeffs")};
        if (static_cast<int>(m.symmetric_coeffs.size()) != arity + 1)
            throw ValidationError("model document: symmetric_coeffs must have arity+1 entries");
        Model out = m;
        require_valid(out);
        return out;
    }
    if (kind == "composite") {
        CompositeLabelModel m{doc.number("rate"), doc.integer("arity"), {}};
        int count = doc.integer("labels");
        for (int i = 1; i <= count; ++i) {
            std::string prefix = "label." + std::to_string(i) + ".";
            m.labels.push_back({doc.raw(prefix + "name"), doc.number(prefix + "prob"),
                                doc.list(prefix + "alpha")});
        }
        Model out = m;
        require_valid(out);
        return out;
    }
    throw ValidationError("model document: unknown kind '" + kind + "'");
}

Model read_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return read_model(buf.str());
}

void write_model_file(const Model& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write model file '" + path + "'");
    out << write_model(m);
}

std::string model_id(const Model& m) {
    static const char* kinds[] = {"outcome", "threshold", "recursive", "composite"};
    std::string doc = write_model(m);
    // FNV-1a over the serialized document.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : doc) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s:%08x", kinds[m.index()], static_cast<unsigned>(h >> 32));
    return buf;
}

}  // namespace bbmvote
