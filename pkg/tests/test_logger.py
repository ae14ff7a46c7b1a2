from pymoyodft.logger import MessageHandler, NoOpMessageHandler


def test_info_goes_to_stderr(capsys):
    msg = MessageHandler()
    msg.info("densité convergée")
    captured = capsys.readouterr()
    assert "densité convergée" in captured.err
    assert captured.out == ""


def test_no_verbose_hides_info_but_keeps_warnings(capsys):
    msg = MessageHandler(verbose=False)
    msg.info("détail")
    msg.iteration("   0  e = -0.5")
    msg.warning("pas de convergence")
    err = capsys.readouterr().err
    assert "détail" not in err
    assert "e = -0.5" not in err
    assert "pas de convergence" in err
    assert "WARNING" in err


def test_error_flag_is_annotated(capsys):
    MessageHandler().text("clé inconnue", flag="error")
    assert "ERREUR" in capsys.readouterr().err


def test_log_file_receives_messages(tmp_path):
    log = tmp_path / "run.log"
    msg = MessageHandler(log_file=str(log))
    msg.titre1("SOLVE")
    msg.info("trace complète")
    content = log.read_text(encoding="utf-8")
    assert "SOLVE" in content
    assert "trace complète" in content


def test_affiche_messages_accepts_pairs_and_strings(capsys):
    msg = MessageHandler()
    msg.affiche_messages([["premier", "success"], "second"], "resultat_item")
    err = capsys.readouterr().err
    assert "premier" in err
    assert "second" in err
    assert "└─" in err


def test_affiche_tableau_aligns_columns(capsys):
    rows = [("E", "ok"), ("F[ρ]", "ÉCHEC")]
    MessageHandler().affiche_tableau(("quantité", "pass"), rows)
    lines = [line.strip() for line in capsys.readouterr().err.splitlines()]
    assert lines[0].startswith("quantité  pass")
    assert lines[1] == "--------  -----"
    assert lines[3].startswith("F[ρ]      ÉCHEC")


def test_noop_handler_is_silent(capsys):
    msg = NoOpMessageHandler()
    msg.titre1("rien")
    msg.warning("rien")
    msg.affiche_tableau(("a",), [("b",)])
    captured = capsys.readouterr()
    assert captured.out == captured.err == ""


def test_resultat_is_shown_in_verbose_mode_only(capsys):
    MessageHandler().resultat("densité proximale : (0.5, 0.5)")
    assert "└─> densité proximale" in capsys.readouterr().err
    MessageHandler(verbose=False).resultat("masqué")
    assert "masqué" not in capsys.readouterr().err
