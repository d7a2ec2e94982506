#include "lowrank/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <vector>

#include "lowrank/errors.hpp"

namespace lowrank {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view token, int line) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw ParseError("expected a number, got '" + std::string(token) + "'", line);
  }
  if (!std::isfinite(v)) throw ParseError("non-finite number '" + std::string(token) + "'", line);
  return v;
}

namespace {

struct Token {
  std::string text;
  int line;
};

std::string strip_comment(const std::string& s) {
  const auto pos = s.find('#');
  return pos == std::string::npos ? s : s.substr(0, pos);
}

std::vector<std::string> split(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

std::vector<Token> tokenize(std::istream& in) {
  std::vector<Token> out;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    for (auto& t : split(strip_comment(line))) out.push_back({std::move(t), no});
  }
  return out;
}

int parse_dim(const Token& t, const char* what) {
  int v = 0;
  const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
  if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size() || v < 1) {
    throw ParseError(std::string(what) + " must be a positive integer, got '" + t.text + "'",
                     t.line);
  }
  return v;
}

class TokenCursor {
 public:
  explicit TokenCursor(std::vector<Token> t) : t_(std::move(t)) {}
  const Token& next(const char* what) {
    if (i_ >= t_.size()) {
      const int line = t_.empty() ? 0 : t_.back().line;
      throw ParseError(std::string("unexpected end of input, expected ") + what, line);
    }
    return t_[i_++];
  }
  bool done() const { return i_ >= t_.size(); }
  const Token& peek() const { return t_[i_]; }

 private:
  std::vector<Token> t_;
  size_t i_ = 0;
};

SymMatrix upper_to_sym(int n, const std::vector<double>& v) { return SymMatrix::from_upper(n, v); }

void write_upper(std::ostream& out, const Matrix& a) {
  bool first = true;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = i; j < a.cols(); ++j) {
      out << (first ? "" : " ") << format_double(a(i, j));
      first = false;
    }
  }
}

}  // namespace

Matrix read_matrix(std::istream& in) {
  TokenCursor cur(tokenize(in));
  const int rows = parse_dim(cur.next("row count"), "row count");
  const int cols = parse_dim(cur.next("column count"), "column count");
  Matrix x(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const Token& t = cur.next("matrix entry");
      x(i, j) = parse_double(t.text, t.line);
    }
  }
  if (!cur.done()) throw ParseError("trailing data after matrix", cur.peek().line);
  return x;
}

void write_matrix(std::ostream& out, const Matrix& x) {
  out << x.rows() << " " << x.cols() << "\n";
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) out << (j ? " " : "") << format_double(x(i, j));
    out << "\n";
  }
}

QuadSystem read_system(std::istream& in) {
  TokenCursor cur(tokenize(in));
  QuadSystem q;
  q.n = parse_dim(cur.next("dimension n"), "dimension n");
  const int m = parse_dim(cur.next("matrix count m"), "matrix count m");
  const int tri = q.n * (q.n + 1) / 2;
  for (int k = 0; k < m; ++k) {
    std::vector<double> v;
    int line = 0;
    for (int i = 0; i < tri; ++i) {
      const Token& t = cur.next("matrix entry");
      line = t.line;
      v.push_back(parse_double(t.text, t.line));
    }
    try {
      q.matrices.push_back(upper_to_sym(q.n, v));
    } catch (const InvalidInput& e) {
      throw ParseError(e.what(), line);
    }
  }
  if (!cur.done()) throw ParseError("trailing data after last matrix", cur.peek().line);
  return q;
}

void write_system(std::ostream& out, const QuadSystem& q) {
  out << q.n << " " << q.matrices.size() << "\n";
  for (const auto& a : q.matrices) {
    write_upper(out, a.matrix());
    out << "\n";
  }
}

const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::matrix: return "matrix";
    case ProblemKind::affine: return "affine";
    case ProblemKind::quadratic: return "quadratic";
  }
  return "unknown";
}

namespace {

constexpr const char* kHeader = "lowrank-problem";
constexpr int kVersion = 1;

const std::set<std::string>& allowed_options(ProblemKind k) {
  static const std::set<std::string> matrix{"epsilon", "epsilon0", "beta", "window", "max_iters"};
  static const std::set<std::string> affine{"epsilon0", "beta", "p", "window", "max_stages"};
  static const std::set<std::string> quadratic{"epsilon", "eta", "seed", "budget", "restarts"};
  switch (k) {
    case ProblemKind::matrix: return matrix;
    case ProblemKind::affine: return affine;
    case ProblemKind::quadratic: return quadratic;
  }
  return matrix;
}

struct Line {
  std::vector<std::string> words;
  int no;
};

}  // namespace

ProblemFile read_problem(std::istream& in) {
  std::vector<Line> lines;
  {
    std::string s;
    int no = 0;
    while (std::getline(in, s)) {
      ++no;
      auto words = split(strip_comment(s));
      if (!words.empty()) lines.push_back({std::move(words), no});
    }
  }
  if (lines.empty()) throw ParseError("empty problem file", 0);
  const Line& head = lines[0];
  if (head.words.size() != 2 || head.words[0] != kHeader) {
    throw ParseError(std::string("expected header '") + kHeader + " " +
                         std::to_string(kVersion) + "'",
                     head.no);
  }
  if (head.words[1] != std::to_string(kVersion)) {
    throw ParseError("unsupported format version " + head.words[1], head.no);
  }
  if (lines.size() < 2 || lines[1].words.size() != 2 || lines[1].words[0] != "kind") {
    throw ParseError("expected 'kind matrix|affine|quadratic'", lines.size() > 1 ? lines[1].no : head.no);
  }
  ProblemFile f;
  const std::string& kind = lines[1].words[1];
  if (kind == "matrix") {
    f.kind = ProblemKind::matrix;
  } else if (kind == "affine") {
    f.kind = ProblemKind::affine;
  } else if (kind == "quadratic") {
    f.kind = ProblemKind::quadratic;
  } else {
    throw ParseError("unknown kind '" + kind + "'", lines[1].no);
  }

  bool have_shape = false;
  Shape shape = Shape::general;
  int rows = 0;
  int cols = 0;
  bool psd = false;
  std::optional<std::pair<double, double>> box;
  std::vector<double> matrix_values;
  int matrix_line = 0;
  bool have_matrix = false;
  std::vector<std::pair<Line, std::vector<double>>> constraints;
  std::set<std::string> seen_sections;
  std::string section;

  for (size_t li = 2; li < lines.size(); ++li) {
    const Line& l = lines[li];
    const std::string& w0 = l.words[0];
    if (w0.front() == '[') {
      if (l.words.size() != 1 || w0.back() != ']') throw ParseError("malformed section header", l.no);
      section = w0.substr(1, w0.size() - 2);
      static const std::set<std::string> known{"shape", "matrix", "constraints", "options"};
      if (!known.count(section)) throw ParseError("unknown section [" + section + "]", l.no);
      if (!seen_sections.insert(section).second) {
        throw ParseError("duplicate section [" + section + "]", l.no);
      }
      if (section == "matrix") {
        if (f.kind != ProblemKind::matrix) throw ParseError("[matrix] only allowed for kind matrix", l.no);
        have_matrix = true;
        matrix_line = l.no;
      }
      if (section == "constraints" && f.kind == ProblemKind::matrix) {
        throw ParseError("[constraints] not allowed for kind matrix", l.no);
      }
      continue;
    }
    if (section.empty()) throw ParseError("content before the first section", l.no);

    if (section == "shape") {
      if (w0 == "general" || w0 == "symmetric") {
        if (have_shape) throw ParseError("shape declared twice", l.no);
        have_shape = true;
        if (w0 == "general") {
          if (l.words.size() != 3) throw ParseError("expected 'general <rows> <cols>'", l.no);
          shape = Shape::general;
          rows = parse_dim({l.words[1], l.no}, "rows");
          cols = parse_dim({l.words[2], l.no}, "cols");
        } else {
          if (l.words.size() != 2) throw ParseError("expected 'symmetric <n>'", l.no);
          shape = Shape::symmetric;
          rows = cols = parse_dim({l.words[1], l.no}, "n");
        }
      } else if (w0 == "psd") {
        if (l.words.size() != 1) throw ParseError("'psd' takes no arguments", l.no);
        psd = true;
      } else if (w0 == "trace_box") {
        if (l.words.size() != 3) throw ParseError("expected 'trace_box <lower> <upper>'", l.no);
        box = std::make_pair(parse_double(l.words[1], l.no), parse_double(l.words[2], l.no));
      } else {
        throw ParseError("unknown key '" + w0 + "' in [shape]", l.no);
      }
    } else if (section == "matrix") {
      for (const auto& w : l.words) matrix_values.push_back(parse_double(w, l.no));
    } else if (section == "constraints") {
      const std::string expect = f.kind == ProblemKind::affine ? "eq" : "quad";
      if (w0 != expect) throw ParseError("expected '" + expect + "' line in [constraints]", l.no);
      size_t colon = 1;
      std::vector<double> v;
      if (f.kind == ProblemKind::affine) {
        if (l.words.size() < 3) throw ParseError("expected 'eq <rhs> : <values>'", l.no);
        v.push_back(parse_double(l.words[1], l.no));
        colon = 2;
      }
      if (l.words.size() <= colon || l.words[colon] != ":") {
        throw ParseError("expected ':' before the coefficient values", l.no);
      }
      for (size_t k = colon + 1; k < l.words.size(); ++k) v.push_back(parse_double(l.words[k], l.no));
      constraints.push_back({l, std::move(v)});
    } else if (section == "options") {
      if (l.words.size() != 3 || l.words[1] != "=") throw ParseError("expected 'key = value'", l.no);
      if (!allowed_options(f.kind).count(w0)) {
        throw ParseError("unknown option '" + w0 + "' for kind " + kind, l.no);
      }
      if (f.options.count(w0)) throw ParseError("option '" + w0 + "' set twice", l.no);
      f.options[w0] = parse_double(l.words[2], l.no);
    }
  }

  if (!have_shape) throw ParseError("missing [shape] declaration", lines.back().no);
  if (f.kind != ProblemKind::affine && (psd || box)) {
    throw ParseError("'psd' and 'trace_box' are only allowed for kind affine", lines.back().no);
  }

  switch (f.kind) {
    case ProblemKind::matrix: {
      if (shape != Shape::general) throw ParseError("kind matrix needs a general shape", lines.back().no);
      if (!have_matrix) throw ParseError("missing [matrix] section", lines.back().no);
      if (static_cast<int>(matrix_values.size()) != rows * cols) {
        throw ParseError("[matrix] needs " + std::to_string(rows * cols) + " values, got " +
                             std::to_string(matrix_values.size()),
                         matrix_line);
      }
      f.matrix = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          matrix_values.data(), rows, cols);
      break;
    }
    case ProblemKind::affine: {
      f.affine = shape == Shape::general ? AffineSetSpec::general(rows, cols)
                                         : AffineSetSpec::symmetric(rows);
      f.affine.psd_required = psd;
      f.affine.trace_box = box;
      const int need = shape == Shape::general ? rows * cols : rows * (rows + 1) / 2;
      for (const auto& [l, v] : constraints) {
        if (static_cast<int>(v.size()) - 1 != need) {
          throw ParseError("constraint needs " + std::to_string(need) + " coefficients, got " +
                               std::to_string(v.size() - 1),
                           l.no);
        }
        std::vector<double> coeff(v.begin() + 1, v.end());
        Matrix a = shape == Shape::general
                       ? Matrix(Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                         Eigen::RowMajor>>(coeff.data(), rows, cols))
                       : SymMatrix::from_upper(rows, coeff).matrix();
        f.affine.add(a, v.front());
      }
      try {
        f.affine.validate();
      } catch (const InvalidInput& e) {
        throw ParseError(e.what(), lines.back().no);
      }
      break;
    }
    case ProblemKind::quadratic: {
      if (shape != Shape::symmetric) throw ParseError("kind quadratic needs a symmetric shape", lines.back().no);
      f.system.n = rows;
      const int need = rows * (rows + 1) / 2;
      for (const auto& [l, v] : constraints) {
        if (static_cast<int>(v.size()) != need) {
          throw ParseError("matrix needs " + std::to_string(need) + " upper-triangle values, got " +
                               std::to_string(v.size()),
                           l.no);
        }
        f.system.matrices.push_back(SymMatrix::from_upper(rows, v));
      }
      if (f.system.matrices.empty()) throw ParseError("quadratic system needs at least one matrix", lines.back().no);
      break;
    }
  }
  return f;
}

void write_problem(std::ostream& out, const ProblemFile& f) {
  out << kHeader << " " << kVersion << "\n";
  out << "kind " << to_string(f.kind) << "\n";
  out << "[shape]\n";
  switch (f.kind) {
    case ProblemKind::matrix:
      out << "general " << f.matrix.rows() << " " << f.matrix.cols() << "\n[matrix]\n";
      for (int i = 0; i < f.matrix.rows(); ++i) {
        for (int j = 0; j < f.matrix.cols(); ++j) out << (j ? " " : "") << format_double(f.matrix(i, j));
        out << "\n";
      }
      break;
    case ProblemKind::affine: {
      const auto& a = f.affine;
      if (a.shape == Shape::general) {
        out << "general " << a.rows << " " << a.cols << "\n";
      } else {
        out << "symmetric " << a.rows << "\n";
      }
      if (a.psd_required) out << "psd\n";
      if (a.trace_box) {
        out << "trace_box " << format_double(a.trace_box->first) << " "
            << format_double(a.trace_box->second) << "\n";
      }
      out << "[constraints]\n";
      for (const auto& c : a.constraints) {
        out << "eq " << format_double(c.rhs) << " :";
        if (a.shape == Shape::general) {
          for (int i = 0; i < c.coeff.rows(); ++i) {
            for (int j = 0; j < c.coeff.cols(); ++j) out << " " << format_double(c.coeff(i, j));
          }
        } else {
          out << " ";
          write_upper(out, c.coeff);
        }
        out << "\n";
      }
      break;
    }
    case ProblemKind::quadratic:
      out << "symmetric " << f.system.n << "\n[constraints]\n";
      for (const auto& m : f.system.matrices) {
        out << "quad : ";
        write_upper(out, m.matrix());
        out << "\n";
      }
      break;
  }
  if (!f.options.empty()) {
    out << "[options]\n";
    for (const auto& [k, v] : f.options) out << k << " = " << format_double(v) << "\n";
  }
}

bool is_problem_file(std::istream& in) {
  std::string s;
  while (std::getline(in, s)) {
    const auto words = split(strip_comment(s));
    if (words.empty()) continue;
    return words[0] == kHeader;
  }
  return false;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace lowrank
