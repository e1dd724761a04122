"""Predicates defined in Prolog and compiled at start-up.

The text is parsed once per process; every machine compiles it afresh
because call sites and linked code belong to the machine.
"""

from __future__ import annotations

LIBRARY = r"""
'$interp'(G, _) :- var(G), !, call(G).
'$interp'((A, B), L) :- !, '$interp'(A, L), '$interp'(B, L).
'$interp'((C -> T ; E), L) :- !, ( call(C) -> '$interp'(T, L) ; '$interp'(E, L) ).
'$interp'((A ; B), L) :- !, ( '$interp'(A, L) ; '$interp'(B, L) ).
'$interp'((C -> T), L) :- !, ( call(C) -> '$interp'(T, L) ).
'$interp'(\+ G, _) :- !, \+ call(G).
'$interp'(!, L) :- !, '$cut'(L).
'$interp'(G, _) :- call(G).

','(A, B) :- call((A, B)).
;(A, B) :- call((A ; B)).
->(A, B) :- call((A -> B)).
\+(G) :- \+ call(G).
not(G) :- \+ call(G).
once(G) :- call(G), !.
ignore(G) :- ( call(G) -> true ; true ).
forall(C, A) :- \+ ( call(C), \+ call(A) ).
repeat.
repeat :- repeat.

findall(T, G, L) :-
    '$bag_new'(B),
    (   call(G), '$bag_add'(B, T), fail
    ;   '$bag_collect'(B, L0)
    ),
    L = L0.
findall(T, G, L, Tail) :- findall(T, G, L0), append(L0, Tail, L).

catch(G, C, R) :- '$catch_enter'(C, R, Ref), call(G), '$catch_exit'(Ref).

call_cleanup(G, C) :- '$cleanup_push'(C, E), call(G), '$cleanup_exit'(E).
setup_call_cleanup(S, G, C) :- once(S), call_cleanup(G, C).

'$run_cleanups'([]).
'$run_cleanups'([G|Gs]) :- ( call(G) -> true ; true ), '$run_cleanups'(Gs).

'$call_goals'([]).
'$call_goals'([G|Gs]) :- call(G), '$call_goals'(Gs).

'$attv_wake'(V, Val) :-
    '$attv_modules'(V, Ms),
    '$attv_verify'(Ms, V, Val, Gs),
    '$attv_bind'(V, Val, Susp),
    '$call_goals'(Gs),
    '$call_goals'(Susp).

'$attv_verify'([], _, _, []).
'$attv_verify'([M|Ms], V, Val, Gs) :-
    '$verify_hook'(M, V, Val, G1),
    '$attv_verify'(Ms, V, Val, G2),
    append(G1, G2, Gs).

freeze(V, G) :- ( '$freeze'(V, G) -> true ; call(G) ).

on_interrupt(G) :- '$set_interrupt_handler'(G).

retract(C) :- '$clause_parts'(C, H, B), '$dyn_clauses'(H, B, Ref), '$retract_ref'(Ref).
clause(H, B) :- '$dyn_clauses'(H, B, _).
clause(H, B, Ref) :- nonvar(Ref), !, instance(Ref, (H :- B)).
clause(H, B, Ref) :- '$dyn_clauses'(H, B, Ref).
retractall(H) :-
    '$ensure_dynamic'(H),
    (   '$dyn_clauses'(H, _, Ref), '$retract_ref'(Ref), fail
    ;   true
    ).

atom_concat(A, B, C) :- var(A), var(B), !, '$atom_splits'(C, Ps), member(A-B, Ps).
atom_concat(A, B, C) :- '$atom_concat'(A, B, C).

append([], L, L).
append([H|T], L, [H|R]) :- append(T, L, R).

member(X, [X|_]).
member(X, [_|T]) :- member(X, T).

memberchk(X, L) :- member(X, L), !.

length(L, N) :- var(N), !, '$length_enum'(L, 0, N).
length(L, N) :- integer(N), !, N >= 0, '$length_make'(N, L).
length(_, N) :- throw(error(type_error(integer, N), length/2)).

'$length_enum'([], N, N).
'$length_enum'([_|T], N0, N) :- N1 is N0 + 1, '$length_enum'(T, N1, N).

'$length_make'(0, L) :- !, L = [].
'$length_make'(N, [_|T]) :- N1 is N - 1, '$length_make'(N1, T).

reverse(L, R) :- '$reverse'(L, [], R).
'$reverse'([], A, A).
'$reverse'([H|T], A, R) :- '$reverse'(T, [H|A], R).

nth0(I, L, X) :- integer(I), !, I >= 0, '$nth'(I, L, X).
nth0(I, L, X) :- '$nth_enum'(L, X, 0, I).
nth1(I, L, X) :- integer(I), !, I >= 1, I0 is I - 1, '$nth'(I0, L, X).
nth1(I, L, X) :- '$nth_enum'(L, X, 1, I).

'$nth'(0, [X|_], X) :- !.
'$nth'(I, [_|T], X) :- I1 is I - 1, '$nth'(I1, T, X).

'$nth_enum'([X|_], X, B, B).
'$nth_enum'([_|T], X, B0, B) :- B1 is B0 + 1, '$nth_enum'(T, X, B1, B).

last([X], X) :- !.
last([_|T], X) :- last(T, X).

select(X, [X|T], T).
select(X, [H|T], [H|R]) :- select(X, T, R).

sum_list(L, S) :- '$sum_list'(L, 0, S).
'$sum_list'([], S, S).
'$sum_list'([X|Xs], S0, S) :- S1 is S0 + X, '$sum_list'(Xs, S1, S).

max_list([X|Xs], M) :- '$max_list'(Xs, X, M).
'$max_list'([], M, M).
'$max_list'([X|Xs], M0, M) :- M1 is max(M0, X), '$max_list'(Xs, M1, M).

min_list([X|Xs], M) :- '$min_list'(Xs, X, M).
'$min_list'([], M, M).
'$min_list'([X|Xs], M0, M) :- M1 is min(M0, X), '$min_list'(Xs, M1, M).

numlist(L, H, []) :- L > H, !.
numlist(L, H, [L|T]) :- L1 is L + 1, numlist(L1, H, T).

maplist(_, []).
maplist(G, [X|Xs]) :- call(G, X), maplist(G, Xs).
maplist(_, [], []).
maplist(G, [X|Xs], [Y|Ys]) :- call(G, X, Y), maplist(G, Xs, Ys).
maplist(_, [], [], []).
maplist(G, [X|Xs], [Y|Ys], [Z|Zs]) :- call(G, X, Y, Z), maplist(G, Xs, Ys, Zs).

foldl(G, L, A0, A) :- '$foldl'(L, G, A0, A).
'$foldl'([], _, A, A).
'$foldl'([X|Xs], G, A0, A) :- call(G, X, A0, A1), '$foldl'(Xs, G, A1, A).

between(L, H, X) :- integer(X), !, X >= L, ( H == inf -> true ; X =< H ).
between(L, H, X) :- H == inf, !, integer(L), '$between_inf'(L, X).
between(L, H, X) :- L =< H, '$between'(L, H, X).

'$between'(L, H, X) :- L =:= H, !, X = L.
'$between'(L, _, L).
'$between'(L, H, X) :- L1 is L + 1, '$between'(L1, H, X).

'$between_inf'(L, L).
'$between_inf'(L, X) :- L1 is L + 1, '$between_inf'(L1, X).
"""

_PARSED = None


def _parsed():
    global _PARSED
    if _PARSED is None:
        from .reader import PrologSyntaxError, read_clauses
        out = []
        for at in read_clauses(LIBRARY):
            if isinstance(at, PrologSyntaxError):
                raise at
            out.append(at)
        _PARSED = out
    return _PARSED


def load_library(m):
    from .compiler import lines_from_spans
    for at in _parsed():
        lines = lines_from_spans(at.term, at.spans, at.line)
        for cc in m.compiler.compile_clause(at.term, "$library", at.line, lines):
            m.add_clause_code(cc, "$library")
