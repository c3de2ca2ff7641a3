"""
HLS-style C emission from a CodegenPlan.

Every file is self-contained: no #include, typedefs and prototypes are
repeated where needed, comments use /* */ only. Output is a pure function
of the plan.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Union

from codesign.explorer.auto_hls.planner import (
    FRAME_PORT,
    OFF_CHIP,
    ON_CHIP,
    POST_ACTIVATION,
    POST_NORMALIZATION,
    RESULT_PORT,
    CallSpec,
    CodegenPlan,
    InstanceDecl,
    Segment,
)
from codesign.explorer.ip_catalog.templates import IpKind
from codesign.explorer.logger_utils.logger_utils import setup_logger
from codesign.explorer.utils.file_tools import SCHEMA_VERSION, dumps_json, write_text

logger = setup_logger("emitter", module="auto_hls")

TOP_FUNCTION = "accel_top"
TOP_FILE = f"{TOP_FUNCTION}.c"
MANIFEST_FILE = "manifest.json"
SCRATCH_PORT = "scratch"
WEIGHTS_PORT = "weights"

_C_TYPES = {8: "signed char", 16: "short"}

IP_PARAMS = (
    "const act_t *in, act_t *out, const wgt_t *weights, const wgt_t *post, "
    "int in_w, int in_h, int cin, int out_w, int out_h, int cout, int post_ops"
)


class CSource:
    """Line-oriented C writer with brace blocks and four-space indentation."""

    def __init__(self):
        self.lines: List[str] = []
        self.depth = 0

    def __call__(self, line: str = ""):
        self.lines.append(("    " * self.depth + line) if line else "")

    def pragma(self, text: str):
        self.lines.append(f"#pragma HLS {text}")

    @contextmanager
    def block(self, opener: str) -> Iterator[None]:
        self(f"{opener} {{")
        self.depth += 1
        yield
        self.depth -= 1
        self("}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


class _Fixed:
    """Fixed-point constants for the model's activation width."""

    def __init__(self, bits: int, clip: str):
        self.frac = bits // 2
        self.max = (1 << (bits - 1)) - 1
        self.min = -(1 << (bits - 1))
        self.clip = self.max if clip == "relu" else min(self.max, int(clip[len("relu"):]) << self.frac)


def _preamble(src: CSource, plan: CodegenPlan, what: str, notes: Sequence[str] = ()):
    m = plan.model
    src(f"/* {what} */")
    src(f"/* {m.bundle.label} ({m.bundle.name}) n_rep={m.n_rep} pf={m.pf} construction={m.construction} */")
    src("/* generated by codesign; do not edit */")
    for note in notes:
        src(f"/* {note} */")
    src()
    src(f"typedef {_C_TYPES[m.quant.activation_bits]} act_t;")
    src(f"typedef {_C_TYPES[m.quant.weight_bits]} wgt_t;")
    src()


def _saturate(src: CSource, fx: _Fixed):
    with src.block("static act_t saturate(int v)"):
        src(f"if (v > {fx.max}) return {fx.max};")
        src(f"if (v < {fx.min}) return {fx.min};")
        src("return (act_t)v;")
    src()


def _load_weights(src: CSource):
    with src.block("static void load_weights(const wgt_t *src, wgt_t *dst, int count)"):
        with src.block("for (int i = 0; i < count; i++)"):
            src.pragma("PIPELINE II=1")
            src("dst[i] = src[i];")
    src()


def _apply_post(src: CSource, fx: _Fixed):
    with src.block("static act_t apply_post(int acc, int post_ops, const wgt_t *post, int ch)"):
        src(f"int v = acc >> {fx.frac};")
        with src.block(f"if (post_ops & {POST_NORMALIZATION})"):
            src(f"v = ((v * post[2 * ch]) >> {fx.frac}) + post[2 * ch + 1];")
        with src.block(f"if (post_ops & {POST_ACTIVATION})"):
            src("if (v < 0) v = 0;")
            src(f"if (v > {fx.clip}) v = {fx.clip};")
        src("return saturate(v);")
    src()


def _conv_body(src: CSource, decl: InstanceDecl, plan: CodegenPlan):
    k = decl.template.kernel
    kk = k * k
    tc = plan.tile.channels
    wbytes = plan.model.quant.weight_bytes
    src(f"static wgt_t wbuf[{max(1, decl.weight_buffer_bytes // wbytes)}];")
    src.pragma(f"ARRAY_PARTITION variable=wbuf cyclic factor={decl.pf}")
    src("int stride = out_w > 0 && in_w / out_w > 1 ? in_w / out_w : 1;")
    with src.block(f"for (int co0 = 0; co0 < cout; co0 += {tc})"):
        src(f"int tc = cout - co0 < {tc} ? cout - co0 : {tc};")
        if decl.template.depthwise:
            src(f"load_weights(weights + co0 * {kk}, wbuf, tc * {kk});")
        else:
            src(f"load_weights(weights + co0 * {kk} * cin, wbuf, tc * {kk} * cin);")
        with src.block("for (int y = 0; y < out_h; y++)"):
            with src.block("for (int x = 0; x < out_w; x++)"):
                with src.block("for (int co = 0; co < tc; co++)"):
                    src.pragma("PIPELINE II=1")
                    src("int acc = 0;")
                    if decl.template.depthwise:
                        _kernel_window(src, k, f"in[(iy * in_w + ix) * cin + co0 + co] * wbuf[(co * {k} + ky) * {k} + kx]",
                                       decl.pf)
                    else:
                        with src.block("for (int ci = 0; ci < cin; ci++)"):
                            src.pragma(f"UNROLL factor={decl.pf}")
                            _kernel_window(
                                src, k,
                                f"in[(iy * in_w + ix) * cin + ci] * wbuf[((co * cin + ci) * {k} + ky) * {k} + kx]",
                                None,
                            )
                    src("out[(y * out_w + x) * cout + co0 + co] = apply_post(acc, post_ops, post, co0 + co);")


def _kernel_window(src: CSource, k: int, product: str, unroll: Optional[int]):
    with src.block(f"for (int ky = 0; ky < {k}; ky++)"):
        with src.block(f"for (int kx = 0; kx < {k}; kx++)"):
            if unroll:
                src.pragma(f"UNROLL factor={unroll}")
            src(f"int iy = y * stride + ky - {k // 2};")
            src(f"int ix = x * stride + kx - {k // 2};")
            with src.block("if (iy >= 0 && iy < in_h && ix >= 0 && ix < in_w)"):
                src(f"acc += {product};")


def _pool_body(src: CSource, decl: InstanceDecl, fx: _Fixed):
    k = decl.template.kernel
    is_max = decl.template.kind == IpKind.MAX_POOL
    src("int sy = out_h > 0 && in_h / out_h > 1 ? in_h / out_h : 1;")
    src("int sx = out_w > 0 && in_w / out_w > 1 ? in_w / out_w : 1;")
    src(f"int wy = sy > 1 ? sy : {k};")
    src(f"int wx = sx > 1 ? sx : {k};")
    src(f"int pad = sy > 1 ? 0 : {k // 2};")
    with src.block("for (int y = 0; y < out_h; y++)"):
        with src.block("for (int x = 0; x < out_w; x++)"):
            with src.block("for (int c = 0; c < cout; c++)"):
                src.pragma("PIPELINE II=1")
                src(f"int best = {fx.min};" if is_max else "int sum = 0;")
                src("int count = 0;")
                with src.block("for (int ky = 0; ky < wy; ky++)"):
                    with src.block("for (int kx = 0; kx < wx; kx++)"):
                        src("int iy = y * sy + ky - pad;")
                        src("int ix = x * sx + kx - pad;")
                        with src.block("if (iy >= 0 && iy < in_h && ix >= 0 && ix < in_w)"):
                            src("int v = in[(iy * in_w + ix) * cin + c];")
                            if is_max:
                                src("if (v > best) best = v;")
                            else:
                                src("sum += v;")
                            src("count++;")
                if is_max:
                    src("out[(y * out_w + x) * cout + c] = saturate(count > 0 ? best : 0);")
                else:
                    src("out[(y * out_w + x) * cout + c] = saturate(count > 0 ? sum / count : 0);")


def _normalization_body(src: CSource, plan: CodegenPlan, fx: _Fixed):
    tc = plan.tile.channels
    src(f"static wgt_t wbuf[{2 * tc}];")
    with src.block(f"for (int c0 = 0; c0 < cout; c0 += {tc})"):
        src(f"int tc = cout - c0 < {tc} ? cout - c0 : {tc};")
        src("load_weights(weights + 2 * c0, wbuf, 2 * tc);")
        with src.block("for (int p = 0; p < out_w * out_h; p++)"):
            with src.block("for (int c = 0; c < tc; c++)"):
                src.pragma("PIPELINE II=1")
                src("int v = in[p * cin + c0 + c];")
                src(f"v = ((v * wbuf[2 * c]) >> {fx.frac}) + wbuf[2 * c + 1];")
                src("out[p * cout + c0 + c] = saturate(v);")


def _activation_body(src: CSource, fx: _Fixed):
    with src.block("for (int i = 0; i < out_w * out_h * cout; i++)"):
        src.pragma("PIPELINE II=1")
        src("int v = in[i];")
        src("if (v < 0) v = 0;")
        src(f"if (v > {fx.clip}) v = {fx.clip};")
        src("out[i] = (act_t)v;")


def emit_instance(plan: CodegenPlan, decl: InstanceDecl) -> str:
    """Source of one compute function."""
    q = plan.model.quant
    fx = _Fixed(q.activation_bits, q.activation_clip)
    kind = decl.template.kind
    src = CSource()
    _preamble(src, plan, f"{decl.name}: {kind.value} compute function, pf={decl.pf}")
    _saturate(src, fx)
    if decl.weight_buffer_bytes:
        _load_weights(src)
    if decl.template.computational:
        _apply_post(src, fx)
    with src.block(f"void {decl.name}({IP_PARAMS})"):
        src.pragma("INLINE off")
        if decl.template.computational:
            _conv_body(src, decl, plan)
        elif kind in (IpKind.MAX_POOL, IpKind.AVG_POOL):
            _pool_body(src, decl, fx)
        elif kind == IpKind.NORMALIZATION:
            _normalization_body(src, plan, fx)
        else:
            _activation_body(src, fx)
    return src.text()


def _pointer(plan: CodegenPlan, name: str) -> str:
    if name in (FRAME_PORT, RESULT_PORT):
        return name
    buf = plan.buffer(name)
    if buf.location == OFF_CHIP:
        return f"{SCRATCH_PORT} + {buf.offset}"
    return name


def _weight_arg(offset: Optional[int]) -> str:
    return f"{WEIGHTS_PORT} + {offset}" if offset is not None else "0"


def _call_line(call: CallSpec, src_ptr: str, dst_ptr: str, in_w: str, in_h: str, out_w: str, out_h: str) -> str:
    d = call.dims
    args = [
        src_ptr, dst_ptr, _weight_arg(call.weight_offset), _weight_arg(call.post_offset),
        in_w, in_h, str(d.inp.channels), out_w, out_h, str(d.out.channels), str(call.post_ops),
    ]
    return f"{call.instance}({', '.join(args)});"


def _describe(call: CallSpec) -> str:
    i, o = call.dims.inp, call.dims.out
    fused = f" fused={list(call.layers[1:])}" if len(call.layers) > 1 else ""
    return (f"/* call {call.index}: layer {call.layers[0]}{fused} "
            f"{i.width}x{i.height}x{i.channels} -> {o.width}x{o.height}x{o.channels}, "
            f"{call.invocations} tile invocations */")


def _emit_direct(src: CSource, plan: CodegenPlan, seg: Segment):
    call = seg.calls[0]
    i, o = call.dims.inp, call.dims.out
    src(f"/* {seg.label} */")
    src(_describe(call))
    src(_call_line(call, _pointer(plan, seg.source), _pointer(plan, seg.dest),
                   str(i.width), str(i.height), str(o.width), str(o.height)))


def _emit_tiled(src: CSource, plan: CodegenPlan, seg: Segment):
    tile = plan.tile
    out = seg.out_dims
    first = seg.calls[0]
    nw, nh, _ = first.tile_loop
    src(f"/* {seg.label}: {out.width}x{out.height}x{out.channels}, step {seg.step} */")
    with src.block(f"for (int ty = 0; ty < {nh}; ty++)"):
        with src.block(f"for (int tx = 0; tx < {nw}; tx++)"):
            src(f"int x0 = tx * {tile.width};")
            src(f"int y0 = ty * {tile.height};")
            src(f"int tw = {out.width} - x0 < {tile.width} ? {out.width} - x0 : {tile.width};")
            src(f"int th = {out.height} - y0 < {tile.height} ? {out.height} - y0 : {tile.height};")
            src(f"load_tile({_pointer(plan, seg.source)}, {first.in_buffer}, {seg.source_dims.width}, "
                f"{first.dims.inp.channels}, x0, y0, tw, th, {seg.step});")
            for call in seg.calls:
                src(_describe(call))
                src(_call_line(call, call.in_buffer, call.out_buffer, "tw", "th", "tw", "th"))
            last = seg.calls[-1]
            src(f"store_tile({last.out_buffer}, {_pointer(plan, seg.dest)}, {out.width}, "
                f"{last.dims.out.channels}, x0, y0, tw, th);")


def _tile_helpers(src: CSource):
    with src.block("static void load_tile(const act_t *src, act_t *dst, int src_w, int channels, "
                   "int x0, int y0, int tw, int th, int step)"):
        with src.block("for (int y = 0; y < th; y++)"):
            with src.block("for (int x = 0; x < tw; x++)"):
                with src.block("for (int c = 0; c < channels; c++)"):
                    src.pragma("PIPELINE II=1")
                    src("dst[(y * tw + x) * channels + c] = "
                        "src[((y0 + y) * step * src_w + (x0 + x) * step) * channels + c];")
    src()
    with src.block("static void store_tile(const act_t *src, act_t *dst, int dst_w, int channels, "
                   "int x0, int y0, int tw, int th)"):
        with src.block("for (int y = 0; y < th; y++)"):
            with src.block("for (int x = 0; x < tw; x++)"):
                with src.block("for (int c = 0; c < channels; c++)"):
                    src.pragma("PIPELINE II=1")
                    src("dst[((y0 + y) * dst_w + x0 + x) * channels + c] = src[(y * tw + x) * channels + c];")
    src()


def halo_note(plan: CodegenPlan) -> Optional[str]:
    """
    Header note for tiled segments that run windowed layers.

    load_tile copies exactly the tile, so a KxK window near a tile border
    sees zero padding where the neighbouring tile's pixels would be.
    """
    kernels = {decl.name: decl.template.kernel for decl in plan.instances}
    k = max((kernels[c.instance] for s in plan.segments if s.tiled for c in s.calls), default=1)
    if k <= 1:
        return None
    return f"tiles are loaded without a halo; {k}x{k} windows are zero-padded at tile borders"


def emit_top(plan: CodegenPlan) -> str:
    """Source of the top-level accelerator function."""
    act = plan.model.quant.activation_bytes
    src = CSource()
    halo = halo_note(plan)
    _preamble(src, plan, f"{TOP_FUNCTION}: {len(plan.schedule)} calls over {len(plan.segments)} segments",
              [halo] if halo else [])
    for decl in plan.instances:
        src(f"void {decl.name}({IP_PARAMS});")
    src()
    _tile_helpers(src)
    ports = f"const act_t *{FRAME_PORT}, act_t *{RESULT_PORT}, const wgt_t *{WEIGHTS_PORT}, act_t *{SCRATCH_PORT}"
    with src.block(f"void {TOP_FUNCTION}({ports})"):
        src.pragma(f"INTERFACE m_axi port={FRAME_PORT} offset=slave bundle=gmem0")
        src.pragma(f"INTERFACE m_axi port={RESULT_PORT} offset=slave bundle=gmem0")
        src.pragma(f"INTERFACE m_axi port={WEIGHTS_PORT} offset=slave bundle=gmem1")
        src.pragma(f"INTERFACE m_axi port={SCRATCH_PORT} offset=slave bundle=gmem0")
        src.pragma("INTERFACE s_axilite port=return")
        for buf in plan.buffers:
            if buf.location == ON_CHIP:
                src(f"static act_t {buf.name}[{buf.size_bytes // act}];")
                src.pragma(f"BIND_STORAGE variable={buf.name} type=ram_2p impl=bram")
        for seg in plan.segments:
            src()
            if seg.tiled:
                _emit_tiled(src, plan, seg)
            else:
                _emit_direct(src, plan, seg)
    return src.text()


def build_manifest(plan: CodegenPlan, files: List[str], estimates: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    m = plan.model
    return {
        "schema_version": SCHEMA_VERSION,
        "top": TOP_FUNCTION,
        "sources": sorted(files),
        "ports": [FRAME_PORT, RESULT_PORT, WEIGHTS_PORT, SCRATCH_PORT],
        "model": {
            "bundle": m.bundle.label,
            "layers": m.bundle.name,
            "n_rep": m.n_rep,
            "pf": m.pf,
            "quant": m.quant.to_dict(),
            "tile": m.tile.to_dict(),
            "construction": m.construction,
            "layer_count": m.layer_count,
        },
        "plan": plan.to_dict(),
        "estimates": estimates,
    }


def emit(plan: CodegenPlan, estimates: Optional[Dict[str, Any]] = None) -> Dict[str, str]:
    """
    Render the source tree of a plan.

    Returns:
        Dict[str, str]: Relative path to file text, including manifest.json
    """
    files = {TOP_FILE: emit_top(plan)}
    for decl in plan.instances:
        files[f"{decl.name}.c"] = emit_instance(plan, decl)
    files[MANIFEST_FILE] = dumps_json(build_manifest(plan, list(files), estimates))
    return dict(sorted(files.items()))


def write_source_tree(plan: CodegenPlan, outdir: Union[str, Path],
                      estimates: Optional[Dict[str, Any]] = None) -> List[Path]:
    """Write the emitted tree under outdir and return the written paths."""
    outdir = Path(outdir)
    written = [write_text(text, outdir / rel) for rel, text in emit(plan, estimates).items()]
    logger.info(f"Wrote {len(written)} files for {plan.model.bundle.label} n_rep={plan.model.n_rep} to {outdir}")
    return written
