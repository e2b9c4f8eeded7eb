//! Parsing of `efetch` PubMed XML (`PubmedArticleSet`) into article records.

use log::warn;
use roxmltree::{Document, Node, ParsingOptions};

use crate::error::{Error, Result};
use crate::ingest::record::year_is_plausible;
use crate::ingest::ArticleRecord;

/// Parses every `PubmedArticle` in the document.
///
/// Articles without a pmid, title or usable year are skipped with a warning.
/// `document` names the source in parse errors.
pub fn parse_pubmed_xml(xml: &str, document: &str) -> Result<Vec<ArticleRecord>> {
    let options = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let doc = Document::parse_with_options(xml, options).map_err(|e| Error::Xml {
        document: document.to_string(),
        message: e.to_string(),
    })?;

    let mut records = Vec::new();
    for article in doc
        .descendants()
        .filter(|n| n.has_tag_name("PubmedArticle"))
    {
        match parse_article(article) {
            Ok(record) => records.push(record),
            Err(reason) => {
                let pos = doc.text_pos_at(article.range().start);
                warn!(
                    "{document}:{}:{}: skipping article: {reason}",
                    pos.row, pos.col
                );
            }
        }
    }
    Ok(records)
}

fn parse_article(article: Node) -> std::result::Result<ArticleRecord, String> {
    let citation = child(article, "MedlineCitation").ok_or("no MedlineCitation")?;
    let pmid = child(citation, "PMID")
        .map(|n| collapse(&text_of(n)))
        .filter(|s| !s.is_empty())
        .ok_or("no PMID")?;
    let body = child(citation, "Article").ok_or_else(|| format!("{pmid}: no Article element"))?;

    let title = child(body, "ArticleTitle")
        .map(|n| collapse(&text_of(n)))
        .unwrap_or_default();
    if title.is_empty() {
        return Err(format!("{pmid}: empty title"));
    }

    let abstract_text = child(body, "Abstract")
        .map(|abs| {
            abs.children()
                .filter(|n| n.has_tag_name("AbstractText"))
                .map(|n| collapse(&text_of(n)))
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .unwrap_or_default();

    let year = publication_year(article, body)
        .ok_or_else(|| format!("{pmid}: no usable publication year"))?;

    Ok(ArticleRecord::new(pmid, title, abstract_text, year))
}

/// Journal issue date, then electronic article date, then Entrez entry date.
fn publication_year(article: Node, body: Node) -> Option<i32> {
    let journal_issue = path(body, &["Journal", "JournalIssue", "PubDate"]).and_then(|date| {
        child(date, "Year")
            .and_then(|y| parse_year(&text_of(y)))
            .or_else(|| child(date, "MedlineDate").and_then(|d| parse_year(&text_of(d))))
    });

    let article_date = || {
        let dates: Vec<Node> = body
            .children()
            .filter(|n| n.has_tag_name("ArticleDate"))
            .collect();
        dates
            .iter()
            .find(|d| d.attribute("DateType") == Some("Electronic"))
            .or(dates.first())
            .and_then(|d| child(*d, "Year"))
            .and_then(|y| parse_year(&text_of(y)))
    };

    let entry_date = || {
        path(article, &["PubmedData", "History"])?
            .children()
            .filter(|n| n.has_tag_name("PubMedPubDate"))
            .find(|n| n.attribute("PubStatus") == Some("entrez"))
            .and_then(|d| child(d, "Year"))
            .and_then(|y| parse_year(&text_of(y)))
    };

    journal_issue.or_else(article_date).or_else(entry_date)
}

/// First run of four digits, if it is a plausible year ("2019 Nov-Dec" -> 2019).
fn parse_year(s: &str) -> Option<i32> {
    let bytes = s.as_bytes();
    bytes
        .windows(4)
        .enumerate()
        .find(|(i, w)| {
            w.iter().all(u8::is_ascii_digit)
                && (*i == 0 || !bytes[i - 1].is_ascii_digit())
                && bytes.get(i + 4).is_none_or(|b| !b.is_ascii_digit())
        })
        .and_then(|(i, _)| s[i..i + 4].parse().ok())
        .filter(|&y| year_is_plausible(y))
}

fn child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|n| n.has_tag_name(name))
}

fn path<'a, 'input>(node: Node<'a, 'input>, names: &[&str]) -> Option<Node<'a, 'input>> {
    names.iter().try_fold(node, |n, name| child(n, name))
}

/// All descendant text, so inline markup (`<i>`, `<sup>`) is kept as text.
fn text_of(node: Node) -> String {
    node.descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect()
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
