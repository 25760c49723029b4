#include "dipolium/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "dipolium/error.hpp"

namespace dipolium {

namespace {

std::string_view trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ','))
      ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != ',')
      ++j;
    if (j > i)
      out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string format_number(double v)
{
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_complex(cdouble z)
{
  if (z.imag() == 0.0)
    return format_number(z.real());
  std::string s = format_number(z.real());
  if (!std::signbit(z.imag()))
    s += '+';
  return s + format_number(z.imag()) + "i";
}

bool read_number(std::string_view s, double& out)
{
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(out);
}

// Parsing helpers report errors against the key being assigned.
struct Field
{
  std::string key;
  int line;

  [[noreturn]] void fail(const std::string& what) const
  {
    throw ConfigError(key + ": " + what, line);
  }

  double number(std::string_view v) const
  {
    double x = 0.0;
    if (!read_number(v, x))
      fail("expected a number, got '" + std::string(v) + "'");
    return x;
  }

  int integer(std::string_view v) const
  {
    int x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
      fail("expected an integer, got '" + std::string(v) + "'");
    return x;
  }

  bool boolean(std::string_view v) const
  {
    if (v == "true" || v == "yes" || v == "1")
      return true;
    if (v == "false" || v == "no" || v == "0")
      return false;
    fail("expected true or false, got '" + std::string(v) + "'");
  }

  cdouble complex(std::string_view v) const
  {
    if (v.empty() || v.back() != 'i')
      return number(v);
    std::string_view body = v.substr(0, v.size() - 1);
    std::size_t cut = std::string_view::npos;
    for (std::size_t i = body.size(); i-- > 1;)
      if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
        cut = i;
        break;
      }
    double re = 0.0;
    double im = 0.0;
    if (cut == std::string_view::npos) {
      if (!read_number(body, im))
        fail("expected a complex number, got '" + std::string(v) + "'");
    } else if (!read_number(body.substr(0, cut), re) || !read_number(body.substr(cut), im)) {
      fail("expected a complex number, got '" + std::string(v) + "'");
    }
    return {re, im};
  }

  template <class E>
  E choice(std::string_view v, std::initializer_list<std::pair<const char*, E>> options) const
  {
    std::string names;
    for (const auto& [name, value] : options) {
      if (v == name)
        return value;
      names += names.empty() ? name : std::string("|") + name;
    }
    fail("expected " + names + ", got '" + std::string(v) + "'");
  }
};

const char* mode_name(RunMode m)
{
  switch (m) {
  case RunMode::sweep: return "sweep";
  case RunMode::evolve: return "evolve";
  case RunMode::closed_form: return "closed-form";
  }
  return "?";
}

const char* dipole_name(DipoleKind d)
{
  switch (d) {
  case DipoleKind::radial: return "radial";
  case DipoleKind::tangential: return "tangential";
  case DipoleKind::vector: return "vector";
  }
  return "?";
}

const char* style_name(OutputStyle s)
{
  switch (s) {
  case OutputStyle::csv: return "csv";
  case OutputStyle::columns: return "columns";
  case OutputStyle::gnuplot: return "gnuplot";
  }
  return "?";
}

void assign_atom(AtomSpec& atom, std::string_view name, std::string_view v, const Field& f)
{
  if (name == "delta_r")
    atom.delta_r = f.number(v);
  else if (name == "theta")
    atom.theta_deg = f.number(v);
  else if (name == "phi")
    atom.phi_deg = f.number(v);
  else if (name == "dipole")
    atom.dipole = f.choice<DipoleKind>(v, {{"radial", DipoleKind::radial},
                                           {"tangential", DipoleKind::tangential},
                                           {"vector", DipoleKind::vector}});
  else if (name == "dipole_vector") {
    const auto parts = split_list(v);
    if (parts.size() != 3)
      f.fail("expected three components");
    for (int i = 0; i < 3; ++i)
      atom.dipole_vector(i) = f.complex(parts[static_cast<std::size_t>(i)]);
  } else if (name == "omega")
    atom.omega = f.number(v);
  else if (name == "gamma0")
    atom.gamma0 = f.number(v);
  else
    f.fail("unknown key");
}

void assign(ScenarioConfig& c, std::string_view section, std::string_view name,
            std::string_view v, const Field& f)
{
  if (section == "material") {
    if (name == "omega_P")
      c.material.omega_P = f.number(v);
    else if (name == "gamma")
      c.material.gamma = f.number(v);
    else
      f.fail("unknown key");
  } else if (section == "sphere") {
    if (name == "diameter")
      c.diameter = f.number(v);
    else
      f.fail("unknown key");
  } else if (section == "model") {
    ModelSpec& m = c.model;
    if (name == "gamma_aa")
      m.gamma_aa = f.number(v);
    else if (name == "gamma_ab")
      m.gamma_ab = f.number(v);
    else if (name == "delta_ab")
      m.delta_ab = f.number(v);
    else if (name == "gamma_plus")
      m.gamma_plus = f.number(v);
    else if (name == "gamma_minus")
      m.gamma_minus = f.number(v);
    else if (name == "half_width")
      m.half_width = f.number(v);
    else if (name == "omega_m")
      m.omega_m = f.number(v);
    else if (name == "branch")
      m.branch = f.choice<int>(v, {{"+", 1}, {"-", -1}, {"+1", 1}, {"-1", -1}, {"1", 1}});
    else if (name == "regime")
      m.strong = f.choice<bool>(v, {{"weak", false}, {"strong", true}});
    else
      f.fail("unknown key");
  } else if (section == "run") {
    RunSpec& r = c.run;
    if (name == "mode")
      r.mode = f.choice<RunMode>(v, {{"sweep", RunMode::sweep},
                                     {"evolve", RunMode::evolve},
                                     {"closed-form", RunMode::closed_form}});
    else if (name == "omega_min")
      r.omega_min = f.number(v);
    else if (name == "omega_max")
      r.omega_max = f.number(v);
    else if (name == "omega_steps")
      r.omega_steps = f.integer(v);
    else if (name == "sweep_axis")
      r.axis = f.choice<SweepAxis>(v, {{"omega", SweepAxis::omega},
                                       {"delta_r", SweepAxis::delta_r}});
    else if (name == "delta_r_min")
      r.delta_r_min = f.number(v);
    else if (name == "delta_r_max")
      r.delta_r_max = f.number(v);
    else if (name == "delta_r_steps")
      r.delta_r_steps = f.integer(v);
    else if (name == "kernel")
      r.kernel = f.choice<KernelKind>(v, {{"sphere", KernelKind::sphere},
                                          {"lorentzian", KernelKind::lorentzian}});
    else if (name == "window")
      r.window = f.number(v);
    else if (name == "kernel_points")
      r.kernel_points = f.integer(v);
    else if (name == "exchange")
      r.exchange = f.choice<ExchangeMode>(v, {{"consistent", ExchangeMode::consistent},
                                              {"as-written", ExchangeMode::as_written}});
    else if (name == "t_max")
      r.t_max = f.number(v);
    else if (name == "dt")
      r.dt = f.number(v);
    else if (name == "initial") {
      r.initial.clear();
      for (std::string_view part : split_list(v))
        r.initial.push_back(f.complex(part));
    } else if (name == "n_max")
      r.n_max = f.integer(v);
    else if (name == "series_tolerance")
      r.series_tolerance = f.number(v);
    else if (name == "threads") {
      const int t = f.integer(v);
      if (t < 0)
        f.fail("must be >= 0");
      r.threads = static_cast<unsigned>(t);
    } else
      f.fail("unknown key");
  } else if (section == "output") {
    OutputSpec& o = c.output;
    if (name == "path")
      o.path = std::string(v);
    else if (name == "label")
      o.label = std::string(v);
    else if (name == "columns") {
      o.columns.clear();
      for (std::string_view part : split_list(v))
        o.columns.emplace_back(part);
    } else if (name == "style")
      o.style = f.choice<OutputStyle>(v, {{"csv", OutputStyle::csv},
                                          {"columns", OutputStyle::columns},
                                          {"gnuplot", OutputStyle::gnuplot}});
    else if (name == "superposition")
      o.superposition = f.boolean(v);
    else
      f.fail("unknown key");
  } else {
    f.fail("unknown section '" + std::string(section) + "'");
  }
}

// Splits "atoms[3].omega" into (3, "omega"); returns -1 for other sections.
int atom_index(std::string_view key, std::string_view& name, const Field& f)
{
  if (key.substr(0, 6) != "atoms[")
    return -1;
  const auto close = key.find(']');
  if (close == std::string_view::npos || close + 1 >= key.size() || key[close + 1] != '.')
    f.fail("malformed atom key");
  const std::string_view digits = key.substr(6, close - 6);
  int idx = 0;
  const auto r = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
  if (r.ec != std::errc() || r.ptr != digits.data() + digits.size() || idx < 0 || idx > 9999)
    f.fail("malformed atom index");
  name = key.substr(close + 2);
  return idx;
}

std::string letter(int i)
{
  if (i < 26)
    return std::string(1, static_cast<char>('A' + i));
  return std::to_string(i + 1);
}

std::vector<std::string> all_columns(const ScenarioConfig& c)
{
  const int n = static_cast<int>(c.atoms.size());
  std::vector<std::string> cols;
  if (c.run.mode == RunMode::sweep) {
    cols.push_back(c.run.axis == SweepAxis::omega ? "omega" : "delta_r");
    cols.push_back("Gamma_AA");
    if (n > 1)
      cols.push_back("Gamma_AB");
    cols.push_back("delta_AA");
    if (n > 1)
      cols.push_back("delta_AB");
    return cols;
  }
  cols.push_back("t");
  for (int a = 0; a < n; ++a)
    cols.push_back("P_" + letter(a));
  if (c.run.mode == RunMode::closed_form)
    return cols;
  for (int a = 0; a < n; ++a) {
    cols.push_back("Re_C_" + letter(a));
    cols.push_back("Im_C_" + letter(a));
  }
  if (c.output.superposition) {
    cols.push_back("P_plus");
    cols.push_back("P_minus");
  }
  return cols;
}

std::vector<double> linspace(double lo, double hi, int n)
{
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return g;
}

std::vector<double> sweep_grid(const ScenarioConfig& c)
{
  if (c.run.axis == SweepAxis::delta_r)
    return linspace(c.run.delta_r_min, c.run.delta_r_max, c.run.delta_r_steps);
  double lo = 0.0;
  double hi = 0.0;
  if (c.run.omega_min && c.run.omega_max) {
    lo = *c.run.omega_min;
    hi = *c.run.omega_max;
  } else {
    const FrequencyBand band = surface_mode_band(c.material);
    if (band.empty())
      throw ConfigError("run.omega_min and run.omega_max are required: the material has no "
                        "surface-mode band");
    lo = c.run.omega_min.value_or(band.lo);
    hi = c.run.omega_max.value_or(band.hi);
  }
  return linspace(lo, hi, c.run.omega_steps);
}

SphereProvider make_provider(const ScenarioConfig& c)
{
  return SphereProvider(c.geometry(), SeriesControl{c.run.n_max, c.run.series_tolerance});
}

// Re-throws a library error with a context prefix, keeping its type.
[[noreturn]] void rethrow_with(const std::string& context)
{
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(context + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(context + e.what(), e.estimate());
  } catch (const DomainError& e) {
    throw DomainError(context + e.what());
  } catch (const Error& e) {
    throw Error(context + e.what());
  }
}

std::string label_of(const ScenarioConfig& c)
{
  return c.output.label.empty() ? std::string("custom") : c.output.label;
}

RunArtifact make_artifact(const ScenarioConfig& c)
{
  RunArtifact art;
  art.label = label_of(c);
  // The echo leaves out the destination so a re-run does not overwrite
  // the file it was read from.
  ScenarioConfig echo = c;
  echo.output.path.clear();
  art.config_text = to_text(echo);
  art.columns = all_columns(c);
  return art;
}

void select_columns(RunArtifact& art, const std::vector<std::string>& wanted)
{
  if (wanted.empty())
    return;
  std::vector<std::size_t> idx;
  for (const std::string& name : wanted)
    idx.push_back(static_cast<std::size_t>(
        std::find(art.columns.begin(), art.columns.end(), name) - art.columns.begin()));
  for (auto& row : art.rows) {
    std::vector<double> r;
    for (std::size_t i : idx)
      r.push_back(row[i]);
    row = std::move(r);
  }
  art.columns = wanted;
}

std::string meta(const std::string& key, double v)
{
  return key + ": " + format_number(v);
}

// Two-atom model parameters, filled from the config or the geometry.
struct TwoAtomModel
{
  double gamma_aa = 0.0;
  double gamma_ab = 0.0;
  double delta_ab = 0.0;
  double gamma_plus = 0.0;
  double gamma_minus = 0.0;
};

TwoAtomModel resolve_model(const ScenarioConfig& c, std::vector<std::string>& metadata)
{
  const ModelSpec& m = c.model;
  TwoAtomModel out;
  const bool need_geometry =
      !m.delta_ab || !((m.gamma_aa && m.gamma_ab) || (m.gamma_plus && m.gamma_minus));
  if (need_geometry) {
    const std::vector<Atom> atoms = c.build_atoms();
    const CouplingMatrix cm = coupling_matrix(atoms, make_provider(c));
    out.gamma_aa = cm.gamma(1, 1);
    out.gamma_ab = cm.gamma(0, 1);
    out.delta_ab = cm.delta(0, 1);
    metadata.push_back(meta("geometry Gamma_AA", out.gamma_aa));
    metadata.push_back(meta("geometry Gamma_AB", out.gamma_ab));
    metadata.push_back(meta("geometry delta_AB", out.delta_ab));
  }
  if (m.gamma_aa && m.gamma_ab) {
    out.gamma_aa = *m.gamma_aa;
    out.gamma_ab = *m.gamma_ab;
  } else if (m.gamma_plus && m.gamma_minus) {
    out.gamma_aa = 0.5 * (*m.gamma_plus + *m.gamma_minus);
    out.gamma_ab = 0.5 * (*m.gamma_plus - *m.gamma_minus);
  }
  if (m.delta_ab)
    out.delta_ab = *m.delta_ab;
  out.gamma_plus = m.gamma_plus.value_or(out.gamma_aa + out.gamma_ab);
  out.gamma_minus = m.gamma_minus.value_or(out.gamma_aa - out.gamma_ab);
  return out;
}

std::vector<double> time_grid(const RunSpec& r)
{
  const long long steps = std::llround(r.t_max / r.dt);
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (long long i = 0; i <= steps; ++i)
    t[static_cast<std::size_t>(i)] = static_cast<double>(i) * r.dt;
  return t;
}

RunArtifact closed_form_run(const ScenarioConfig& c)
{
  RunArtifact art = make_artifact(c);
  const TwoAtomModel p = resolve_model(c, art.metadata);
  const std::vector<double> t = time_grid(c.run);
  OccupationPair occ;
  if (c.model.strong) {
    const double hw = *c.model.half_width;
    occ = strong_coupling_closed_form(t, p.gamma_plus, p.gamma_minus, hw, p.delta_ab,
                                      c.model.branch);
    const double strong = c.model.branch > 0 ? p.gamma_plus : p.gamma_minus;
    art.metadata.push_back("solution: strong-coupling closed form");
    art.metadata.push_back(meta("rabi frequency", rabi_frequency(strong, hw)));
    art.metadata.push_back("regime: " + to_string(classify_regime(strong, hw)));
  } else {
    occ = weak_coupling_closed_form(t, p.gamma_aa, p.gamma_ab, p.delta_ab);
    art.metadata.push_back("solution: weak-coupling closed form");
  }
  art.metadata.push_back(meta("Gamma_plus", p.gamma_plus));
  art.metadata.push_back(meta("Gamma_minus", p.gamma_minus));
  art.metadata.push_back(meta("delta_AB", p.delta_ab));
  art.metadata.push_back("steps: " + std::to_string(t.size() - 1));
  for (std::size_t i = 0; i < t.size(); ++i)
    art.rows.push_back({t[i], occ.p_a[i], occ.p_b[i]});
  return art;
}

RunArtifact evolve_run(const ScenarioConfig& c)
{
  RunArtifact art = make_artifact(c);
  const std::vector<Atom> atoms = c.build_atoms();
  const int n = static_cast<int>(atoms.size());
  const double g0 = atoms.front().gamma0;

  std::vector<cdouble> initial = c.run.initial;
  if (initial.empty()) {
    initial.assign(static_cast<std::size_t>(n), 0.0);
    initial[0] = 1.0;
  }

  std::optional<MemoryKernel> kernel;
  Eigen::MatrixXd exchange;
  CouplingMatrix couplings;
  double half_width = 0.0;

  if (c.run.kernel == KernelKind::sphere) {
    const SphereProvider provider = make_provider(c);
    couplings = coupling_matrix(atoms, provider);
    double mean = 0.0;
    for (const Atom& a : atoms)
      mean += a.omega_shifted / n;
    const KernelWindow window{mean - c.run.window, mean + c.run.window};
    KernelSampling sampling;
    sampling.initial_points = c.run.kernel_points;
    kernel = build_kernel(atoms, provider, window, sampling);
    exchange = explicit_exchange(couplings, *kernel, c.run.exchange);
    art.metadata.push_back("kernel: sphere, window [" + format_number(window.lo) + ", " +
                           format_number(window.hi) + "]");
    art.metadata.push_back("kernel grid points: " + std::to_string(kernel->grid().size()));
    art.metadata.push_back(meta("window shift AA", kernel->window_shift(0, 0)));
    if (n > 1) {
      art.metadata.push_back(meta("window shift AB", kernel->window_shift(0, 1)));
      art.metadata.push_back(meta("geometry Gamma_AB", couplings.gamma(0, 1)));
      art.metadata.push_back(meta("geometry delta_AB", couplings.delta(0, 1)));
    }
    art.metadata.push_back(meta("geometry Gamma_AA", couplings.gamma(0, 0)));
  } else {
    const TwoAtomModel p = resolve_model(c, art.metadata);
    half_width = *c.model.half_width;
    const int branch = c.model.branch;
    const double strong = branch > 0 ? p.gamma_plus : p.gamma_minus;
    const double weak = branch > 0 ? p.gamma_minus : p.gamma_plus;
    const double w_mean = 0.5 * (atoms[0].omega_shifted + atoms[1].omega_shifted);
    LorentzianResonance line;
    line.omega_m = c.model.omega_m.value_or(w_mean - branch * p.delta_ab * g0);
    line.half_width = half_width * g0;
    line.weight.resize(2, 2);
    line.weight << strong / 2, branch * strong / 2, branch * strong / 2, strong / 2;
    Eigen::MatrixXd flat(2, 2);
    flat << weak / 2, -branch * weak / 2, -branch * weak / 2, weak / 2;
    kernel = MemoryKernel::lorentzian({atoms[0].omega_shifted, atoms[1].omega_shifted}, g0,
                                      {line});
    kernel->add_markov(flat);
    exchange.resize(2, 2);
    exchange << 0.0, p.delta_ab, p.delta_ab, 0.0;
    Eigen::MatrixXcd k(2, 2);
    const cdouble kaa(-0.5 * p.gamma_aa, 0.0);
    const cdouble kab(-0.5 * p.gamma_ab, p.delta_ab);
    k << kaa, kab, kab, kaa;
    couplings = CouplingMatrix(k * g0, w_mean, g0);
    art.metadata.push_back("kernel: lorentzian");
    art.metadata.push_back(meta("omega_m", line.omega_m));
    art.metadata.push_back(meta("half width", half_width));
    art.metadata.push_back(meta("rabi frequency", rabi_frequency(strong, half_width)));
    art.metadata.push_back("regime: " + to_string(classify_regime(strong, half_width)));
  }

  VolterraOptions options;
  options.t_max = c.run.t_max;
  options.dt = c.run.dt;
  const AmplitudeTrajectory traj = solve_volterra(*kernel, exchange, initial, options);

  double peak_total = 0.0;
  for (std::size_t i = 0; i < traj.t.size(); ++i)
    peak_total = std::max(peak_total, traj.total_probability(static_cast<int>(i)));
  art.metadata.push_back("steps: " + std::to_string(traj.t.size() - 1));
  art.metadata.push_back(meta("max total probability", peak_total));

  std::optional<SuperpositionView> sup;
  if (c.output.superposition)
    sup = to_superposition(traj, couplings, half_width, 1e-6);

  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    std::vector<double> r{traj.t[i]};
    for (int a = 0; a < n; ++a)
      r.push_back(traj.probability(static_cast<int>(i), a));
    for (int a = 0; a < n; ++a) {
      r.push_back(traj.amplitude(row, a).real());
      r.push_back(traj.amplitude(row, a).imag());
    }
    if (sup) {
      r.push_back(std::norm(sup->c_plus[i]));
      r.push_back(std::norm(sup->c_minus[i]));
    }
    art.rows.push_back(std::move(r));
  }
  return art;
}

} // namespace

// ---------------------------------------------------------------------------
// Config

SphereGeometry ScenarioConfig::geometry() const
{
  SphereGeometry g;
  g.diameter = diameter;
  g.material = material;
  return g;
}

std::vector<Atom> ScenarioConfig::build_atoms() const
{
  std::vector<Atom> out;
  const double a = 0.5 * diameter;
  for (const AtomSpec& s : atoms) {
    const double th = s.theta_deg * pi / 180.0;
    const double ph = s.phi_deg * pi / 180.0;
    Atom atom;
    atom.position = point_above_surface(a, s.delta_r, th, ph);
    switch (s.dipole) {
    case DipoleKind::radial:
      atom.orientation = (atom.position / atom.position.norm()).cast<cdouble>();
      break;
    case DipoleKind::tangential:
      atom.orientation = CVec3(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph),
                               -std::sin(th));
      break;
    case DipoleKind::vector:
      atom.orientation = s.dipole_vector;
      break;
    }
    atom.omega_bare = s.omega;
    atom.omega_shifted = s.omega;
    atom.gamma0 = s.gamma0;
    out.push_back(atom);
  }
  return out;
}

void ScenarioConfig::validate() const
{
  auto bad = [](const std::string& what) { throw ConfigError(what); };
  try {
    material.validate();
  } catch (const DomainError& e) {
    bad(std::string("material: ") + e.what());
  }
  if (!(diameter > 0.0))
    bad("sphere.diameter must be positive");
  if (atoms.empty())
    bad("at least one atom required");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const AtomSpec& s = atoms[i];
    const std::string key = "atoms[" + std::to_string(i) + "].";
    if (!(s.delta_r > 0.0))
      bad(key + "delta_r must be positive (atoms sit outside the sphere)");
    if (!(s.omega > 0.0))
      bad(key + "omega must be positive");
    if (!(s.gamma0 > 0.0))
      bad(key + "gamma0 must be positive");
    if (s.dipole == DipoleKind::vector && s.dipole_vector.norm() == 0.0)
      bad(key + "dipole_vector must be nonzero");
  }
  const std::vector<Atom> built = build_atoms();
  for (std::size_t i = 0; i < built.size(); ++i)
    for (std::size_t j = i + 1; j < built.size(); ++j)
      if ((built[i].position - built[j].position).norm() < 1e-12)
        bad("atoms[" + std::to_string(i) + "] and atoms[" + std::to_string(j) +
            "] share a position");

  const RunSpec& r = run;
  const std::size_t n = atoms.size();
  if (r.omega_min && !(*r.omega_min > 0.0))
    bad("run.omega_min must be positive");
  if (r.omega_min && r.omega_max && !(*r.omega_max >= *r.omega_min))
    bad("run.omega_max must not be below run.omega_min");
  if (r.omega_steps < 1)
    bad("run.omega_steps must be at least 1");
  if (!(r.delta_r_min > 0.0) || !(r.delta_r_max >= r.delta_r_min))
    bad("run.delta_r_min/delta_r_max must satisfy 0 < min <= max");
  if (r.delta_r_steps < 1)
    bad("run.delta_r_steps must be at least 1");
  if (!(r.window > 0.0))
    bad("run.window must be positive");
  if (r.kernel_points < 8)
    bad("run.kernel_points must be at least 8");
  if (!(r.t_max >= 0.0))
    bad("run.t_max must be non-negative");
  if (!(r.dt > 0.0))
    bad("run.dt must be positive");
  if (r.t_max / r.dt > 1e7)
    bad("run.t_max / run.dt exceeds 1e7 steps");
  if (r.n_max < 0)
    bad("run.n_max must be >= 0");
  if (!(r.series_tolerance > 0.0 && r.series_tolerance <= 1e-2))
    bad("run.series_tolerance must lie in (0, 1e-2]");
  if (!r.initial.empty()) {
    if (r.initial.size() != n)
      bad("run.initial needs one amplitude per atom");
    double total = 0.0;
    for (const cdouble& z : r.initial)
      total += std::norm(z);
    if (total > 1.0 + 1e-12)
      bad("run.initial occupations sum to more than 1");
  }

  const ModelSpec& m = model;
  const bool two_atom = r.mode == RunMode::closed_form ||
                        (r.mode == RunMode::evolve && r.kernel == KernelKind::lorentzian) ||
                        output.superposition;
  if (two_atom && n != 2)
    bad(std::string(output.superposition ? "output.superposition" : "this run mode") +
        " requires exactly two atoms");
  const bool needs_width = (r.mode == RunMode::closed_form && m.strong) ||
                           (r.mode == RunMode::evolve && r.kernel == KernelKind::lorentzian);
  if (needs_width && !m.half_width)
    bad("model.half_width is required for a Lorentzian line");
  if (m.half_width && !(*m.half_width > 0.0))
    bad("model.half_width must be positive");
  if (m.omega_m && !(*m.omega_m > 0.0))
    bad("model.omega_m must be positive");
  for (const auto* v : {&m.gamma_aa, &m.gamma_plus})
    if (*v && !(**v >= 0.0))
      bad("model rates must be non-negative");
  if (output.superposition && r.mode != RunMode::evolve)
    bad("output.superposition applies to evolve runs only");

  const std::vector<std::string> cols = all_columns(*this);
  std::set<std::string> seen;
  for (const std::string& col : output.columns) {
    if (std::find(cols.begin(), cols.end(), col) == cols.end()) {
      std::string list;
      for (const auto& x : cols)
        list += (list.empty() ? "" : " ") + x;
      bad("output.columns: unknown column '" + col + "' (available: " + list + ")");
    }
    if (!seen.insert(col).second)
      bad("output.columns: column '" + col + "' listed twice");
  }
}

namespace {

ScenarioConfig parse_impl(std::string_view text, bool check)
{
  ScenarioConfig c;
  std::set<std::string> keys;
  std::map<int, AtomSpec> atoms;
  std::map<int, int> atom_lines;
  bool have_mode = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("expected 'section.key = value', got '" + std::string(line) + "'",
                        line_no);
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const Field f{std::string(key), line_no};
    if (key.empty())
      throw ConfigError("missing key before '='", line_no);
    if (value.empty())
      f.fail("missing value");
    if (!keys.insert(std::string(key)).second)
      throw ConfigError("duplicate key '" + std::string(key) + "'", line_no);

    std::string_view name;
    const int idx = atom_index(key, name, f);
    if (idx >= 0) {
      assign_atom(atoms[idx], name, value, f);
      atom_lines.emplace(idx, line_no);
      continue;
    }
    const auto dot = key.find('.');
    if (dot == std::string_view::npos)
      f.fail("expected section.key");
    assign(c, key.substr(0, dot), key.substr(dot + 1), value, f);
    if (key == "run.mode")
      have_mode = true;
  }

  int expected = 0;
  for (const auto& [idx, spec] : atoms) {
    if (idx != expected)
      throw ConfigError("atoms[" + std::to_string(expected) + "] is missing (atoms[" +
                            std::to_string(idx) + "] given)",
                        atom_lines[idx]);
    if (!keys.count("atoms[" + std::to_string(idx) + "].delta_r"))
      throw ConfigError("missing required key atoms[" + std::to_string(idx) + "].delta_r",
                        atom_lines[idx]);
    c.atoms.push_back(spec);
    ++expected;
  }
  if (check) {
    if (!have_mode)
      throw ConfigError("missing required key run.mode");
    c.validate();
  }
  return c;
}

} // namespace

ScenarioConfig parse_config(std::string_view text)
{
  return parse_impl(text, true);
}

void apply_override(ScenarioConfig& config, std::string_view key, std::string_view value)
{
  key = trim(key);
  value = trim(value);
  const Field f{std::string(key), 0};
  if (value.empty())
    f.fail("missing value");
  ScenarioConfig next = config;
  std::string_view name;
  const int idx = atom_index(key, name, f);
  if (idx >= 0) {
    if (static_cast<std::size_t>(idx) > next.atoms.size())
      f.fail("atom index beyond the end of the atom list");
    if (static_cast<std::size_t>(idx) == next.atoms.size())
      next.atoms.emplace_back();
    assign_atom(next.atoms[static_cast<std::size_t>(idx)], name, value, f);
  } else {
    const auto dot = key.find('.');
    if (dot == std::string_view::npos)
      f.fail("expected section.key");
    assign(next, key.substr(0, dot), key.substr(dot + 1), value, f);
  }
  next.validate();
  config = std::move(next);
}

std::string to_text(const ScenarioConfig& c)
{
  std::ostringstream out;
  auto line = [&](const std::string& key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  line("material.omega_P", format_number(c.material.omega_P));
  line("material.gamma", format_number(c.material.gamma));
  line("sphere.diameter", format_number(c.diameter));
  for (std::size_t i = 0; i < c.atoms.size(); ++i) {
    const AtomSpec& a = c.atoms[i];
    const std::string p = "atoms[" + std::to_string(i) + "].";
    line(p + "delta_r", format_number(a.delta_r));
    line(p + "theta", format_number(a.theta_deg));
    line(p + "phi", format_number(a.phi_deg));
    line(p + "dipole", dipole_name(a.dipole));
    if (a.dipole == DipoleKind::vector)
      line(p + "dipole_vector", format_complex(a.dipole_vector(0)) + " " +
                                    format_complex(a.dipole_vector(1)) + " " +
                                    format_complex(a.dipole_vector(2)));
    line(p + "omega", format_number(a.omega));
    line(p + "gamma0", format_number(a.gamma0));
  }
  const ModelSpec& m = c.model;
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v)
      line(key, format_number(*v));
  };
  opt("model.gamma_aa", m.gamma_aa);
  opt("model.gamma_ab", m.gamma_ab);
  opt("model.delta_ab", m.delta_ab);
  opt("model.gamma_plus", m.gamma_plus);
  opt("model.gamma_minus", m.gamma_minus);
  opt("model.half_width", m.half_width);
  opt("model.omega_m", m.omega_m);
  line("model.branch", m.branch > 0 ? "+" : "-");
  line("model.regime", m.strong ? "strong" : "weak");

  const RunSpec& r = c.run;
  line("run.mode", mode_name(r.mode));
  opt("run.omega_min", r.omega_min);
  opt("run.omega_max", r.omega_max);
  line("run.omega_steps", std::to_string(r.omega_steps));
  line("run.sweep_axis", r.axis == SweepAxis::omega ? "omega" : "delta_r");
  line("run.delta_r_min", format_number(r.delta_r_min));
  line("run.delta_r_max", format_number(r.delta_r_max));
  line("run.delta_r_steps", std::to_string(r.delta_r_steps));
  line("run.kernel", r.kernel == KernelKind::sphere ? "sphere" : "lorentzian");
  line("run.window", format_number(r.window));
  line("run.kernel_points", std::to_string(r.kernel_points));
  line("run.exchange", r.exchange == ExchangeMode::consistent ? "consistent" : "as-written");
  line("run.t_max", format_number(r.t_max));
  line("run.dt", format_number(r.dt));
  if (!r.initial.empty()) {
    std::string v;
    for (const cdouble& z : r.initial)
      v += (v.empty() ? "" : " ") + format_complex(z);
    line("run.initial", v);
  }
  line("run.n_max", std::to_string(r.n_max));
  line("run.series_tolerance", format_number(r.series_tolerance));
  line("run.threads", std::to_string(r.threads));

  const OutputSpec& o = c.output;
  if (!o.label.empty())
    line("output.label", o.label);
  if (!o.path.empty())
    line("output.path", o.path);
  if (!o.columns.empty()) {
    std::string v;
    for (const auto& col : o.columns)
      v += (v.empty() ? "" : ",") + col;
    line("output.columns", v);
  }
  line("output.style", style_name(o.style));
  line("output.superposition", o.superposition ? "true" : "false");
  return out.str();
}

ScenarioConfig load_preset(std::string_view name)
{
  for (const Preset& p : builtin_presets())
    if (name == p.name) {
      ScenarioConfig c;
      try {
        c = parse_config(p.text);
      } catch (const ConfigError& e) {
        throw ConfigError("preset '" + std::string(name) + "': " + e.what());
      }
      if (c.output.label.empty())
        c.output.label = std::string(name);
      return c;
    }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Runs

RunArtifact run_sweep(const ScenarioConfig& config)
{
  config.validate();
  if (config.run.mode != RunMode::sweep)
    throw ConfigError("run_sweep: run.mode must be sweep");
  const std::string context = label_of(config) + ": sweep: ";
  try {
    RunArtifact art = make_artifact(config);
    const std::vector<double> grid = sweep_grid(config);
    const int n = static_cast<int>(config.atoms.size());
    std::vector<CouplingMatrix> mats(grid.size());

    if (config.run.axis == SweepAxis::omega) {
      const std::vector<Atom> atoms = config.build_atoms();
      CouplingSpectrum s =
          sweep_spectrum(atoms, grid, make_provider(config), config.run.threads);
      mats = std::move(s.matrices);
    } else {
      const SphereProvider provider = make_provider(config);
      parallel_for(grid.size(), config.run.threads, [&](std::size_t i) {
        ScenarioConfig local = config;
        for (AtomSpec& a : local.atoms)
          a.delta_r = grid[i];
        const std::vector<Atom> atoms = local.build_atoms();
        mats[i] = coupling_matrix(atoms, provider);
      });
    }

    for (std::size_t i = 0; i < grid.size(); ++i) {
      const CouplingMatrix& m = mats[i];
      std::vector<double> row{grid[i], m.gamma(0, 0)};
      if (n > 1)
        row.push_back(m.gamma(0, 1));
      row.push_back(m.delta(0, 0));
      if (n > 1)
        row.push_back(m.delta(0, 1));
      art.rows.push_back(std::move(row));
    }

    art.metadata.push_back("sweep points: " + std::to_string(grid.size()));
    const std::vector<Atom> atoms = config.build_atoms();
    if (config.run.n_max > 0) {
      art.metadata.push_back("multipole order: " + std::to_string(config.run.n_max));
    } else if (!config.material.is_vacuum()) {
      const double a = 0.5 * config.diameter;
      const bool by_omega = config.run.axis == SweepAxis::omega;
      const double r0 = by_omega ? atoms.front().position.norm() : a + grid.front();
      const double r1 = by_omega ? atoms.back().position.norm() : r0;
      const double w = by_omega ? grid.back() : atoms.front().omega_shifted;
      const int order =
          auto_multipole_order(config.geometry(), w, r0, r1, config.run.series_tolerance);
      art.metadata.push_back("multipole order: auto, up to " + std::to_string(order));
    }
    art.metadata.push_back(meta("series tolerance", config.run.series_tolerance));
    select_columns(art, config.output.columns);
    return art;
  } catch (const Error&) {
    rethrow_with(context);
  }
}

RunArtifact run_evolution(const ScenarioConfig& config)
{
  config.validate();
  if (config.run.mode == RunMode::sweep)
    throw ConfigError("run_evolution: run.mode must be evolve or closed-form");
  const std::string context = label_of(config) + ": " + mode_name(config.run.mode) + ": ";
  try {
    RunArtifact art =
        config.run.mode == RunMode::closed_form ? closed_form_run(config) : evolve_run(config);
    art.metadata.push_back(meta("dt", config.run.dt));
    select_columns(art, config.output.columns);
    return art;
  } catch (const Error&) {
    rethrow_with(context);
  }
}

RunArtifact run_scenario(const ScenarioConfig& config)
{
  return config.run.mode == RunMode::sweep ? run_sweep(config) : run_evolution(config);
}

// ---------------------------------------------------------------------------
// Plot data

std::string emit_plot_data(const RunArtifact& artifact, OutputStyle style)
{
  std::string out;
  out += "# dipolium " + std::string(version()) + " " + artifact.label + "\n";
  out += std::string("# style: ") + style_name(style) + "\n";
  for (const std::string& m : artifact.metadata)
    out += "# " + m + "\n";
  std::size_t pos = 0;
  const std::string& cfg = artifact.config_text;
  while (pos < cfg.size()) {
    auto eol = cfg.find('\n', pos);
    if (eol == std::string::npos)
      eol = cfg.size();
    out += "#! " + cfg.substr(pos, eol - pos) + "\n";
    pos = eol + 1;
  }
  out += "# column count: " + std::to_string(artifact.columns.size()) + "\n";
  out += "# columns:";
  for (const std::string& c : artifact.columns)
    out += " " + c;
  out += "\n";
  if (style == OutputStyle::gnuplot) {
    out += "# using:";
    for (std::size_t i = 1; i < artifact.columns.size(); ++i)
      out += " 1:" + std::to_string(i + 1);
    out += "\n";
  }
  const char sep = style == OutputStyle::csv ? ',' : ' ';
  if (style == OutputStyle::csv) {
    for (std::size_t i = 0; i < artifact.columns.size(); ++i)
      out += (i ? "," : "") + artifact.columns[i];
    out += "\n";
  }
  char buf[64];
  for (const auto& row : artifact.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i)
        out += sep;
      const auto r = std::to_chars(buf, buf + sizeof buf, row[i], std::chars_format::scientific, 8);
      out.append(buf, r.ptr);
    }
    out += "\n";
  }
  return out;
}

PlotData parse_plot_data(std::string_view text)
{
  PlotData data;
  bool have_columns = false;
  std::size_t declared = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos)
      eol = text.size();
    const std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty())
      continue;
    if (line.front() == '#') {
      if (line.starts_with("# columns:")) {
        for (std::string_view name : split_list(line.substr(10)))
          data.columns.emplace_back(name);
        have_columns = true;
      } else if (line.starts_with("# column count:")) {
        const std::string_view v = trim(line.substr(15));
        std::from_chars(v.data(), v.data() + v.size(), declared);
      }
      continue;
    }
    if (!have_columns)
      throw ConfigError("plot data: numeric row before the column header", line_no);
    const auto cells = split_list(line);
    if (!cells.empty() && std::string_view(cells.front()) == data.columns.front())
      continue; // csv header row
    if (cells.size() != data.columns.size())
      throw ConfigError("plot data: row has " + std::to_string(cells.size()) +
                            " values, header declares " + std::to_string(data.columns.size()),
                        line_no);
    std::vector<double> row;
    for (std::string_view cell : cells) {
      double v = 0.0;
      const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (r.ec != std::errc() || r.ptr != cell.data() + cell.size())
        throw ConfigError("plot data: bad number '" + std::string(cell) + "'", line_no);
      row.push_back(v);
    }
    data.rows.push_back(std::move(row));
  }
  if (declared != 0 && declared != data.columns.size())
    throw ConfigError("plot data: column count does not match the column names");
  return data;
}

ScenarioConfig config_from_artifact(std::string_view text)
{
  std::string cfg;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos)
      eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.starts_with("#! ")) {
      cfg += line.substr(3);
      cfg += '\n';
    }
  }
  if (cfg.empty())
    throw ConfigError("no configuration echo found in the output header");
  return parse_config(cfg);
}

std::string_view version() noexcept
{
  return DIPOLIUM_VERSION;
}

} // namespace dipolium
